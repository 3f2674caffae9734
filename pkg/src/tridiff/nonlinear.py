"""Secure nonlinear protocols on replicated shares: the clamped Chebyshev
exponential, softmax, SiLU/Mish/ReLU, and the time-embedding MLP.

Structure of the softmax protocol: compute the in-range mask and the running
maximum, shift the inputs below zero, map onto [-1, 1], build the power chain
t^2..t^7 with six sequential fixed multiplications, combine the integer-
coefficient basis polynomials locally, take the masked (default) or raw sum
as denominator, and replace division by a reciprocal-broadcast multiply.

The activation protocol evaluates three comparisons, xor-combines them into
interval indicators, builds x^2/x^4/x^6 with two squares and one multiply,
evaluates both branch polynomials locally at double scale, and recombines the
branches with exact boolean-arithmetic multiplications.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import primitives, rss
from .coeffs import EXP_FIT, MISH_FIT, SILU_FIT, ActivationFit, ExpFit
from .rss import BoolShare, PartyRuntime, ShareTensor

__all__ = [
    "SoftmaxConfig",
    "baseline_mish",
    "baseline_silu",
    "baseline_softmax",
    "iterative_exp",
    "neg_exp",
    "secure_activation",
    "secure_embedding_frequencies",
    "secure_mish",
    "secure_relu",
    "secure_silu",
    "secure_softmax",
    "secure_time_embedding",
]

# T_i as integer combinations of plain powers: {degree: ([(power, coef)...], const)}
_CHEB_INT = {
    1: ([(1, 1)], 0),
    2: ([(2, 2)], -1),
    3: ([(3, 4), (1, -3)], 0),
    4: ([(4, 8), (2, -8)], 1),
    5: ([(5, 16), (3, -20), (1, 5)], 0),
    6: ([(6, 32), (4, -48), (2, 18)], -1),
    7: ([(7, 64), (5, -112), (3, 56), (1, -7)], 0),
}


@dataclass(frozen=True)
class SoftmaxConfig:
    """``epsilon`` is subtracted together with the maximum; it encodes to at
    least one LSB when positive.  ``masked_denominator`` multiplies the
    numerator by the in-range mask before summing (bounds the error from
    entries whose mapped argument leaves [-1, 1]); the faithful variant sums
    the raw fitted values."""

    epsilon: float = 1e-6
    masked_denominator: bool = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


def _epsilon_ring(rt: PartyRuntime, epsilon: float) -> int:
    if epsilon <= 0:
        return 0
    return max(1, rt.ring.encode_int(epsilon))


def effective_epsilon(epsilon: float, frac_bits: int = 18) -> float:
    """The shift the share protocol actually applies: a positive epsilon
    encodes to at least one LSB.  Plaintext twins use this value so both
    paths subtract the same quantity."""
    if epsilon <= 0:
        return 0.0
    return max(1, round(epsilon * (1 << frac_bits))) / float(1 << frac_bits)


def _negexp_core(rt: PartyRuntime, xhat: ShareTensor,
                 fit: ExpFit) -> tuple[BoolShare, ShareTensor]:
    """Mask bit 1{xhat > cutoff} and the Chebyshev-basis value of the fit.

    Expects xhat <= 0.  The unit map is affine (one truncation), powers are
    built by iterated multiplication, the basis combinations are local
    integer arithmetic, and the coefficient sum costs a single truncation.
    """
    mask = primitives.lt(rt, float(fit.cutoff), xhat)
    slope = -2.0 / fit.cutoff
    t = rss.lincomb(rt, [(xhat, slope)], const=1.0)
    degree = len(fit.coeffs) - 1
    powers = {1: t}
    for i in range(2, degree + 1):
        powers[i] = rss.fixed_mul(rt, powers[i - 1], t)
    terms = []
    for i in range(1, degree + 1):
        combo, const = _CHEB_INT[i]
        acc = None
        for power, coef in combo:
            part = rss.mul_public_int(rt, powers[power], coef)
            acc = part if acc is None else rss.add(rt, acc, part)
        if const:
            acc = rss.add_public(rt, acc, rt.ring.encode_int(float(const)))
        terms.append((acc, fit.coeffs[i]))
    # basis values stay in [-1, 1] wherever the mask keeps the result
    value = rss.lincomb(rt, terms, const=fit.coeffs[0],
                        bounds=[1.0] * len(terms))
    return mask, value


def neg_exp(rt: PartyRuntime, x: ShareTensor, fit: ExpFit = EXP_FIT) -> ShareTensor:
    """Clamped exponential on shares: zero at or below the cutoff, the
    polynomial fit above it.  Callers keep values <= 0 (e.g. by subtracting a
    maximum first)."""
    with rt.comm.label("negexp"):
        mask, value = _negexp_core(rt, x, fit)
        return primitives.mul_ba(rt, mask, value)


def _softmax_with_exp(rt: PartyRuntime, x: ShareTensor, cfg: SoftmaxConfig,
                      fit: ExpFit, exp_core) -> ShareTensor:
    n = x.shape[-1]
    if n < 1:
        raise ValueError("softmax needs a nonempty last axis")
    m = primitives.max_vec(rt, x, keepdims=True)
    xhat = rss.sub(rt, x, m)
    eps = _epsilon_ring(rt, cfg.epsilon)
    if eps:
        xhat = rss.add_public(rt, xhat, rt.ring.neg(np.uint64(eps)))
    mask, z = exp_core(rt, xhat, fit)
    if cfg.masked_denominator:
        z = primitives.mul_ba(rt, mask, z)
    denom = rss.sum_last(rt, z, keepdims=True)
    inv = primitives.recip(rt, denom, 0.9, float(max(n, 1)))
    ratio = rss.fixed_mul(rt, z, inv)
    return primitives.mul_ba(rt, mask, ratio)


def secure_softmax(rt: PartyRuntime, x: ShareTensor,
                   cfg: SoftmaxConfig | None = None,
                   fit: ExpFit = EXP_FIT) -> ShareTensor:
    """Softmax along the last axis on shares; one reciprocal per row replaces
    the division, broadcast-multiplied into the numerators."""
    cfg = cfg or SoftmaxConfig()
    with rt.comm.label("softmax"):
        return _softmax_with_exp(rt, x, cfg, fit, _negexp_core)


def _stacked_interval_bits(rt: PartyRuntime, x: ShareTensor,
                           fit: ActivationFit):
    """The three comparisons of the activation protocol in one batched sign
    extraction: x < lo, x < mid, hi < x."""
    lo = rt.ring.encode(np.float64(fit.lo_break))
    mid = rt.ring.encode(np.float64(fit.mid_break))
    hi = rt.ring.encode(np.float64(fit.hi_break))
    d0 = rss.add_public(rt, x, rt.ring.neg(lo))      # x - lo
    d1 = rss.add_public(rt, x, rt.ring.neg(mid))     # x - mid
    d2 = rss.add_public(rt, rss.neg(rt, x), hi)      # hi - x
    stacked = rss.stack([d0, d1, d2])
    bits = primitives.a2b_msb(rt, stacked)
    return bits[0], bits[1], bits[2]


def _secure_piecewise(rt: PartyRuntime, x: ShareTensor,
                      fit: ActivationFit) -> ShareTensor:
    b0, b1, b2 = _stacked_interval_bits(rt, x, fit)
    z0 = rss.xor(b0, b1)                       # 1{lo <= x < mid}
    z1 = rss.bnot(rt, rss.xor(b1, b2))         # 1{mid <= x <= hi}
    z2 = b2                                    # 1{x > hi}
    x2 = primitives.square(rt, x)
    x4 = primitives.square(rt, x2)
    x6 = rss.fixed_mul(rt, x2, x4)
    a2, a1, a0 = fit.quad
    c6, c4, c2, c1, c0 = fit.hexic
    # term bounds inside each branch's interval, for coefficient precision
    b = max(abs(fit.lo_break), abs(fit.hi_break))
    quad = rss.lincomb(rt, [(x2, a2), (x, a1)], const=a0, bounds=[b * b, b])
    hexic = rss.lincomb(rt, [(x6, c6), (x4, c4), (x2, c2), (x, c1)],
                        const=c0, bounds=[b ** 6, b ** 4, b * b, b])
    parts = primitives.mul_ba(rt, rss.stack_bits([z0, z1, z2]),
                              rss.stack([quad, hexic, x]))
    return rss.add(rt, rss.add(rt, parts[0], parts[1]), parts[2])


def secure_silu(rt: PartyRuntime, x: ShareTensor,
                fit: ActivationFit = SILU_FIT) -> ShareTensor:
    with rt.comm.label("silu"):
        return _secure_piecewise(rt, x, fit)


def secure_mish(rt: PartyRuntime, x: ShareTensor,
                fit: ActivationFit = MISH_FIT) -> ShareTensor:
    with rt.comm.label("mish"):
        return _secure_piecewise(rt, x, fit)


def secure_relu(rt: PartyRuntime, x: ShareTensor) -> ShareTensor:
    """max(0, x) on shares: one comparison and one exact masked multiply."""
    with rt.comm.label("relu"):
        nonneg = rss.bnot(rt, primitives.lt(rt, x, 0.0))
        return primitives.mul_ba(rt, nonneg, x)


def secure_activation(rt: PartyRuntime, x: ShareTensor, kind: str) -> ShareTensor:
    if kind == "relu":
        return secure_relu(rt, x)
    if kind == "silu":
        return secure_silu(rt, x)
    if kind == "mish":
        return secure_mish(rt, x)
    raise ValueError(f"unknown activation {kind!r}")


def secure_time_embedding(rt: PartyRuntime, emb_public, w1: ShareTensor,
                          b1: ShareTensor, w2: ShareTensor,
                          b2: ShareTensor) -> ShareTensor:
    """Timestep MLP on shares: public sinusoidal embedding in, then
    linear -> SiLU -> linear with shared weights."""
    with rt.comm.label("temb"):
        h = rss.add(rt, rss.matmul_public(rt, emb_public, w1), b1)
        h = secure_silu(rt, h)
        return rss.add(rt, rss.fixed_matmul(rt, h, w2), b2)


def secure_embedding_frequencies(rt: PartyRuntime, half: int,
                                 max_period: float = 10_000.0) -> ShareTensor:
    """Secret-timestep variant of the positional-embedding exponentials:
    evaluates exp(-k * ln(max_period) / half) under shares via the clamped
    Chebyshev exponential.  The arguments stay within the fit's domain for
    any reasonable period."""
    exponents = -np.log(max_period) * np.arange(half, dtype=np.float64) / half
    shares = rss.const_share_reals(rt, exponents)
    return neg_exp(rt, shares)


# ---------------------------------------------------------------------------
# iterative baselines (cost comparison stand-ins)
# ---------------------------------------------------------------------------


def iterative_exp(rt: PartyRuntime, x: ShareTensor, squarings: int = 8) -> ShareTensor:
    """Limit-approximation exponential (1 + x/2^m)^(2^m): one shift plus m
    sequential squarings.  Valid while |x| stays well below 2^m."""
    u = rss.truncate(rt, x, squarings)
    u = rss.add_public(rt, u, rt.ring.encode_int(1.0))
    for _ in range(squarings):
        u = primitives.square(rt, u)
    return u


def _iterexp_core(squarings: int):
    def core(rt, xhat, fit):
        mask = primitives.lt(rt, float(fit.cutoff), xhat)
        return mask, iterative_exp(rt, xhat, squarings)

    return core


def baseline_softmax(rt: PartyRuntime, x: ShareTensor,
                     cfg: SoftmaxConfig | None = None,
                     squarings: int = 8) -> ShareTensor:
    """Softmax with the iterative exponential in place of the polynomial fit;
    identical masking, maximum, and reciprocal machinery, so cost differences
    isolate the exponential path."""
    cfg = cfg or SoftmaxConfig()
    with rt.comm.label("baseline-softmax"):
        return _softmax_with_exp(rt, x, cfg, EXP_FIT, _iterexp_core(squarings))


def baseline_silu(rt: PartyRuntime, x: ShareTensor,
                  squarings: int = 8) -> ShareTensor:
    """x * sigmoid(x) the literal way: iterative exp of -x, add one, full
    range reciprocal, multiply.  Intended for |x| <= 6 (cost baseline)."""
    with rt.comm.label("baseline-silu"):
        e = iterative_exp(rt, rss.neg(rt, x), squarings)
        denom = rss.add_public(rt, e, rt.ring.encode_int(1.0))
        sig = primitives.recip(rt, denom, 1.0, 1.0 + float(np.exp(6.0)))
        return rss.fixed_mul(rt, x, sig)


def baseline_mish(rt: PartyRuntime, x: ShareTensor,
                  squarings: int = 8) -> ShareTensor:
    """x * tanh(softplus(x)) without logarithms: with u = exp(x),
    tanh(softplus(x)) = (u^2 + 2u) / (u^2 + 2u + 2).  Intended for |x| <= 6
    (cost baseline)."""
    with rt.comm.label("baseline-mish"):
        u = iterative_exp(rt, x, squarings)
        w = rss.fixed_mul(rt, u, rss.add_public(rt, u, rt.ring.encode_int(2.0)))
        denom = rss.add_public(rt, w, rt.ring.encode_int(2.0))
        hi = float(np.exp(12.0) + 2.0 * np.exp(6.0) + 2.0)
        ratio = primitives.recip(rt, denom, 2.0, hi)
        return rss.fixed_mul(rt, x, rss.fixed_mul(rt, w, ratio))
