"""Finite-n density, kernel and boundary asymptotics of the elliptic random normal matrix ensemble."""

from .params import EnsembleParams

__version__ = "0.1.0"

__all__ = ["EnsembleParams", "__version__"]
