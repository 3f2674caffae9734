"""Real-arithmetic twins of the secure nonlinear protocols.

These evaluate exactly the polynomial/piecewise math the share protocols
implement, in float64, and are the ground truth for share-vs-plaintext
equivalence tests.  Branch selection mirrors the protocols' strict
comparisons: the exp fit applies only for x strictly above the cutoff.
"""

from __future__ import annotations

import numpy as np

from .coeffs import (
    EXP_FIT,
    MISH_FIT,
    SILU_FIT,
    ActivationFit,
    ExpFit,
    chebyshev_basis,
)

__all__ = [
    "approx_activation",
    "approx_mish",
    "approx_negexp",
    "approx_relu",
    "approx_silu",
    "approx_softmax",
]


def _cheb_eval(t, coeffs) -> np.ndarray:
    return np.tensordot(np.asarray(coeffs),
                        chebyshev_basis(t, len(coeffs) - 1), axes=(0, 0))


def approx_negexp(x, fit: ExpFit = EXP_FIT):
    """Clamped exponential: 0 at or below the cutoff, the Chebyshev-basis fit
    above it (callers keep inputs <= 0)."""
    x = np.asarray(x, dtype=np.float64)
    vals = _cheb_eval(fit.map_unit(x), fit.coeffs)
    return np.where(x > fit.cutoff, vals, 0.0)


def approx_softmax(x, epsilon: float = 0.0, masked: bool = True,
                   fit: ExpFit = EXP_FIT):
    """Softmax along the last axis with the fitted exponential and a
    reciprocal-broadcast multiply in place of division.

    ``masked`` multiplies the numerator by the in-range indicator before the
    denominator sum (the default share path); the faithful variant sums the
    raw fit values, where entries far below the cutoff pollute the sum.
    """
    x = np.asarray(x, dtype=np.float64)
    xhat = x - x.max(axis=-1, keepdims=True) - epsilon
    mask = (xhat > fit.cutoff).astype(np.float64)
    z = _cheb_eval(fit.map_unit(xhat), fit.coeffs)
    if masked:
        z = z * mask
    denom = z.sum(axis=-1, keepdims=True)
    return mask * (z * (1.0 / denom))


def _piecewise(x, fit: ActivationFit):
    x = np.asarray(x, dtype=np.float64)
    a2, a1, a0 = fit.quad
    c6, c4, c2, c1, c0 = fit.hexic
    quad = a2 * x * x + a1 * x + a0
    hexic = c6 * x ** 6 + c4 * x ** 4 + c2 * x * x + c1 * x + c0
    return np.where(
        x < fit.lo_break, 0.0,
        np.where(x < fit.mid_break, quad,
                 np.where(x <= fit.hi_break, hexic, x)))


def approx_silu(x, fit: ActivationFit = SILU_FIT):
    return _piecewise(x, fit)


def approx_mish(x, fit: ActivationFit = MISH_FIT):
    return _piecewise(x, fit)


def approx_relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def approx_activation(kind: str):
    try:
        return {"relu": approx_relu, "silu": approx_silu,
                "mish": approx_mish}[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
