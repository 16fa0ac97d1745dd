"""Hierarchical multi-instance learning on bags of instance features.

Exposes the autodiff engine, taxonomy, dual-branch model, losses, data
handling, training loop, metrics and flat baselines as subpackages.
"""

__version__ = "0.1.0"

__all__: list[str] = []
