"""Holonomic surface-code gates, error models and syndrome simulation."""
