"""Finite-difference gradient oracle.

``finite_diff_grad`` is the independent reference every backward rule is
checked against: central differences, element by element, evaluated
outside any tape. ``check_gradients`` runs one taped forward/backward
and compares, optionally on a sampled subset of elements so whole-model
checks stay fast.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor, backward, current_mode

__all__ = ["finite_diff_grad", "check_gradients", "GradCheckResult"]


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        return float(value.data.reshape(-1)[0])
    return float(value)


def finite_diff_grad(f, x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar-valued ``f`` at ``x``.

    Perturbs ``x.data`` in place element-by-element; the tensor is
    restored exactly afterwards. ``f`` must be deterministic.
    """
    if h <= 0:
        raise ValueError("finite_diff_grad: h must be positive")
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = _scalar(f())
        flat[i] = orig - h
        f_minus = _scalar(f())
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


class GradCheckResult:
    """Outcome of one analytic-vs-numeric comparison."""

    def __init__(self, name: str, worst_rel: float, worst_abs: float, passed: bool):
        self.name = name
        self.worst_rel = worst_rel
        self.worst_abs = worst_abs
        self.passed = passed

    def __repr__(self):
        status = "ok" if self.passed else "FAIL"
        return f"GradCheckResult({self.name}: rel={self.worst_rel:.3e} {status})"


def check_gradients(
    f,
    params: dict[str, Tensor] | list[Tensor],
    h: float = 1e-5,
    rtol: float = 1e-4,
    atol: float = 1e-7,
    sample: int | None = None,
    sample_seed: int = 0,
    name: str = "gradcheck",
) -> GradCheckResult:
    """Compare backward gradients of ``f()`` against central differences.

    ``f`` builds and returns a scalar loss Tensor from ``params``. With
    ``sample`` set, at most that many elements per parameter are
    checked (deterministically chosen), keeping full-model checks fast.
    Requires 64-bit mode; finite differences are meaningless in f32.
    """
    if current_mode() != "f64":
        raise RuntimeError("check_gradients requires 64-bit mode")
    if isinstance(params, dict):
        items = list(params.items())
    else:
        items = [(f"param{i}", p) for i, p in enumerate(params)]

    for _, p in items:
        p.zero_grad()
    with Tape():
        loss = f()
    backward(loss)

    picker = np.random.Generator(np.random.Philox(key=sample_seed))
    worst_rel = 0.0
    worst_abs = 0.0
    passed = True
    for _, p in items:
        if p.grad is None:
            raise RuntimeError(f"{name}: parameter received no gradient")
        flat = p.data.reshape(-1)
        gflat = p.grad.reshape(-1)
        n = flat.size
        if sample is not None and n > sample:
            idx = picker.choice(n, size=sample, replace=False)
        else:
            idx = np.arange(n)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = _scalar(f())
            flat[i] = orig - h
            f_minus = _scalar(f())
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * h)
            bw = gflat[i]
            err = abs(fd - bw)
            scale = max(abs(fd), abs(bw))
            rel = err / scale if scale > atol else 0.0
            worst_rel = max(worst_rel, rel)
            worst_abs = max(worst_abs, err)
            if err > rtol * scale + atol:
                passed = False
    return GradCheckResult(name, worst_rel, worst_abs, passed)
