"""Empirical privacy auditing of differentially private synthetic-data generators."""
