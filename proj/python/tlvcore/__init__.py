"""Tri-modal contrastive representation learner: python surface.

The heavy lifting lives in the compiled ``_tlvcore`` extension; this package
re-exports its public names.
"""

from ._tlvcore import (
    ConfigError,
    Dataset,
    DomainError,
    Model,
    ShapeError,
    condition_number,
    cosine,
    grad_check,
    l2_normalize,
    pair_infonce,
    softmax,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Dataset",
    "DomainError",
    "Model",
    "ShapeError",
    "condition_number",
    "cosine",
    "grad_check",
    "l2_normalize",
    "pair_infonce",
    "softmax",
    "__version__",
]
