"""The distinguishing game and the audit built on it.

rounds plays single rounds, runner orchestrates whole audits, settings
validates experiment configs.
"""
