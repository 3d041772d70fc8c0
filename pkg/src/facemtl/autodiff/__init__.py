"""Minimal dense-tensor library with reverse-mode autodiff."""

from .tensor import (
    DomainError,
    ShapeError,
    Tape,
    TapeError,
    Tensor,
    active_tape,
    as_tensor,
    backward,
    current_mode,
    default_dtype,
    precision,
    set_mode,
)
from .rng import Rng, derive_seed
from .gradcheck import GradCheckResult, check_gradients, finite_diff_grad
from . import ops

__all__ = [
    "Tensor",
    "Tape",
    "Rng",
    "ops",
    "ShapeError",
    "DomainError",
    "TapeError",
    "active_tape",
    "as_tensor",
    "backward",
    "current_mode",
    "default_dtype",
    "derive_seed",
    "precision",
    "set_mode",
    "finite_diff_grad",
    "check_gradients",
    "GradCheckResult",
]
