"""Test package for the privacy auditor."""
