"""Shared utilities for hmil (logging, errors, runtime settings)."""

__all__: list[str] = []
