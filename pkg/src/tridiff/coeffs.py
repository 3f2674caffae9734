"""Polynomial coefficient tables for the secure nonlinear protocols, the
fitting routines that regenerate them, and the text coefficient-file format.

Shipped defaults:

* ``EXP_FIT`` — degree-7 Chebyshev-basis fit of exp(x) on [cutoff, 0] with
  cutoff -14, chosen because exp(-14) is already below one fixed-point LSB
  at 18 fraction bits.
* ``SILU_FIT`` / ``MISH_FIT`` — piecewise fits: zero below -6, a quadratic on
  [-6, -2), a degree-6 polynomial restricted to even powers plus a linear and
  constant term on [-2, 6], identity above 6.

Coefficient files are plain UTF-8 text, one coefficient per line, ``#``
comments allowed.  Order: for exp, the 8 Chebyshev-basis coefficients c_0..c_7;
for an activation, the quadratic's x^2, x^1, x^0 followed by the second
branch's x^6, x^4, x^2, x^1, x^0 (8 lines).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EXP_FIT",
    "MISH_FIT",
    "SILU_FIT",
    "ActivationFit",
    "ExpFit",
    "FitReport",
    "chebyshev_basis",
    "fit_activation",
    "fit_exp",
    "read_coeff_file",
    "write_coeff_file",
]


@dataclass(frozen=True)
class ExpFit:
    """Chebyshev-basis fit of exp on [cutoff, 0]; zero below cutoff."""

    cutoff: float
    coeffs: tuple[float, ...]

    def map_unit(self, x):
        """Affine map [cutoff, 0] -> [-1, 1]."""
        return -2.0 * (np.asarray(x, dtype=np.float64) - self.cutoff) / self.cutoff - 1.0


@dataclass(frozen=True)
class ActivationFit:
    """Piecewise activation: 0 | quadratic | even-power hexic | identity,
    with breakpoints (-6, -2, 6)."""

    kind: str
    quad: tuple[float, float, float]            # x^2, x, 1
    hexic: tuple[float, float, float, float, float]  # x^6, x^4, x^2, x, 1
    lo_break: float = -6.0
    mid_break: float = -2.0
    hi_break: float = 6.0


EXP_FIT = ExpFit(
    cutoff=-14.0,
    coeffs=(0.14021878, 0.27541278, 0.22122865, 0.14934221,
            0.09077360, 0.04369614, 0.02087868, 0.00996535),
)

SILU_FIT = ActivationFit(
    kind="silu",
    quad=(-0.01420163, -0.16910363, -0.52212664),
    hexic=(0.00008032, -0.00602401, 0.19784596, 0.49379432, 0.03453821),
)

MISH_FIT = ActivationFit(
    kind="mish",
    quad=(-0.01572019, -0.18375535, -0.55684445),
    hexic=(0.00010786, -0.00735309, 0.20152583, 0.54902050, 0.07559242),
)


def chebyshev_basis(t, degree: int) -> np.ndarray:
    """Stack of T_0(t)..T_degree(t) via the three-term recurrence."""
    t = np.asarray(t, dtype=np.float64)
    rows = [np.ones_like(t), t]
    for _ in range(2, degree + 1):
        rows.append(2.0 * t * rows[-1] - rows[-2])
    return np.stack(rows[:degree + 1])


@dataclass
class FitReport:
    max_abs: float
    mse: float
    worst_x: float

    def format(self) -> str:
        return (f"max_abs={self.max_abs:.6e} mse={self.mse:.6e} "
                f"worst_x={self.worst_x:.6f}")


def _report(xs: np.ndarray, approx: np.ndarray, exact: np.ndarray) -> FitReport:
    err = np.abs(approx - exact)
    i = int(err.argmax())
    return FitReport(float(err[i]), float(np.mean((approx - exact) ** 2)),
                     float(xs[i]))


def fit_exp(interval: tuple[float, float] = (-14.0, 0.0), degree: int = 7,
            grid: int = 100_001) -> tuple[ExpFit, FitReport]:
    """Least-squares Chebyshev-basis fit of exp on a uniform grid."""
    a, b = interval
    if not a < b:
        raise ValueError("degenerate interval")
    xs = np.linspace(a, b, grid)
    t = 2.0 * (xs - a) / (b - a) - 1.0
    coeffs = np.polynomial.chebyshev.chebfit(t, np.exp(xs), degree)
    fit = ExpFit(cutoff=a, coeffs=tuple(float(c) for c in coeffs))
    approx = coeffs @ chebyshev_basis(t, degree)
    return fit, _report(xs, approx, np.exp(xs))


def _exact_activation(kind: str):
    from . import reference

    try:
        return {"silu": reference.exact_silu, "mish": reference.exact_mish}[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


def fit_activation(kind: str, grid: int = 20_001) -> tuple[ActivationFit, FitReport]:
    """Least-squares piecewise fit: full quadratic on [-6, -2], even powers
    plus linear and constant on [-2, 6]."""
    exact = _exact_activation(kind)
    xs0 = np.linspace(-6.0, -2.0, grid)
    A0 = np.stack([xs0 ** 2, xs0, np.ones_like(xs0)], axis=1)
    quad, _, _, _ = np.linalg.lstsq(A0, exact(xs0), rcond=None)
    xs1 = np.linspace(-2.0, 6.0, grid)
    A1 = np.stack([xs1 ** 6, xs1 ** 4, xs1 ** 2, xs1, np.ones_like(xs1)], axis=1)
    hexic, _, _, _ = np.linalg.lstsq(A1, exact(xs1), rcond=None)
    fit = ActivationFit(kind=kind, quad=tuple(map(float, quad)),
                        hexic=tuple(map(float, hexic)))
    xs = np.concatenate([xs0, xs1])
    approx = np.concatenate([A0 @ quad, A1 @ hexic])
    return fit, _report(xs, approx, exact(xs))


def fit_polynomial(fn, interval: tuple[float, float], degree: int,
                   grid: int = 20_001) -> tuple[np.ndarray, FitReport]:
    """Generic dense-grid least-squares fit in the Chebyshev basis; used by
    the fit command for arbitrary degree experiments."""
    a, b = interval
    if not a < b:
        raise ValueError("degenerate interval")
    xs = np.linspace(a, b, grid)
    t = 2.0 * (xs - a) / (b - a) - 1.0
    coeffs = np.polynomial.chebyshev.chebfit(t, fn(xs), degree)
    approx = coeffs @ chebyshev_basis(t, degree)
    return coeffs, _report(xs, approx, fn(xs))


# ---------------------------------------------------------------------------
# coefficient files
# ---------------------------------------------------------------------------


def write_coeff_file(path, values, header: str = "") -> None:
    lines = []
    if header:
        lines.extend(f"# {line}" for line in header.splitlines())
    lines.extend(f"{float(v):.17g}" for v in values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_coeff_file(path) -> list[float]:
    values = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ValueError(f"{path}: bad coefficient line {raw!r}") from None
    return values


def exp_fit_from_file(path, cutoff: float = EXP_FIT.cutoff) -> ExpFit:
    values = read_coeff_file(path)
    if len(values) != 8:
        raise ValueError(f"{path}: expected 8 coefficients, got {len(values)}")
    return ExpFit(cutoff=cutoff, coeffs=tuple(values))


def activation_fit_from_file(path, kind: str) -> ActivationFit:
    values = read_coeff_file(path)
    if len(values) != 8:
        raise ValueError(f"{path}: expected 8 coefficients, got {len(values)}")
    return ActivationFit(kind=kind, quad=tuple(values[:3]),
                         hexic=tuple(values[3:]))


def activation_fit(kind: str) -> ActivationFit:
    try:
        return {"silu": SILU_FIT, "mish": MISH_FIT}[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
