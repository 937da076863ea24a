"""Central finite-difference gradient checking."""
from __future__ import annotations

import numpy as np


class NonFiniteError(ArithmeticError):
    pass


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. ``x`` (perturbed in place)."""
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = float(f())
        x[i] = old - eps
        fm = float(f())
        x[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"non-finite value at index {i}")
        g[i] = (fp - fm) / (2 * eps)
    return g


def relative_error(analytic, numeric, floor: float = 1e-12) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(n))):
        raise NonFiniteError("non-finite gradient")
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def grad_check(f, x: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between ``f``'s analytic and numeric gradient.

    ``f(x)`` must return ``(value, grad)``; ``x`` is perturbed in place and
    restored.
    """
    _, analytic = f(x)
    analytic = np.array(analytic, dtype=np.float64)
    numeric = numeric_grad(lambda: f(x)[0], x, eps)
    return relative_error(analytic, numeric)
