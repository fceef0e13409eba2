"""Spatio-spectral depth completion: spectral/spatial fusion network, synthetic RGB-D data and experiment harness."""

from s2ml.errors import TrainingError, ValidationError

__version__ = "0.1.0"

__all__ = ["TrainingError", "ValidationError", "__version__"]
