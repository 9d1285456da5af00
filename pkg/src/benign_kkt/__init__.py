"""Benign overfitting of max-margin linear classifiers and leaky ReLU networks.

Synthetic data models, orthogonality geometry, a hard-margin solver, a
two-layer leaky ReLU network with KKT certification, test-error bounds and
estimators, and an experiment harness.
"""

from .errors import InfeasibleError, TrainingFailure, ValidationError

__version__ = "0.1.0"

__all__ = ["InfeasibleError", "TrainingFailure", "ValidationError", "__version__"]
