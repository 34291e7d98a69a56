"""Atomic circle measures, multiplication unitaries and averaged wave operators."""
from waveops.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
