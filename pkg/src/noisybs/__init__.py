"""Partial-distinguishability models of noisy Boson Sampling.

Permanent and derangement-sum kernels, fixed-point-count distinguishability
models with exact positivity certificates, output-probability routes,
symmetric-group character expansions and seeded Monte-Carlo experiments.
"""

__version__ = "0.1.0"

from noisybs.errors import (
    CapacityError,
    ExactArithmeticError,
    ImaginaryResidueError,
    InvariantError,
    NoisyBSError,
)

__all__ = [
    "__version__",
    "CapacityError",
    "ExactArithmeticError",
    "ImaginaryResidueError",
    "InvariantError",
    "NoisyBSError",
]
