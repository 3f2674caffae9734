"""Secret-shared building blocks: less-than, maximum, reciprocal, square,
and boolean-by-arithmetic multiplication.

Comparison extracts the sign bit of a difference with a ripple-carry adder
over boolean shares: l-1 AND rounds, batched bit-parallel across all tensor
elements, so the round count is independent of the vector length.
"""

from __future__ import annotations

import math

import numpy as np

from . import rss
from .rss import BoolShare, PartyRuntime, ShareTensor

__all__ = [
    "a2b_msb",
    "bit_to_arith",
    "lt",
    "max_vec",
    "mul_ba",
    "recip",
    "square",
]


def _bool_input_operands(rt: PartyRuntime, x: ShareTensor):
    """Boolean sharings of s = x_0 + x_1 and of x_2, costing one ring element
    from party 0 and no traffic for x_2.

    Party 0 already holds both x_0 and x_1, so it can xor-share their sum: the
    component shared with party 1 comes from the pairwise PRF, the third
    component is zero, and the masked word travels to party 2.  x_2 needs no
    communication at all: parties 1 and 2 hold it, so (0, 0, x_2) is already a
    consistent boolean sharing.
    """
    mask = rt.zs.input_mask_words(owner=0, shape=x.shape)
    zeros = np.zeros(x.shape, dtype=np.uint64)
    if rt.party == 0:
        s = rt.ring.add(x.lo, x.hi)
        a0 = s ^ mask
        rt.comm.send(2, rss._to_bytes(a0))
        a = BoolShare(a0, mask)
        b = BoolShare(zeros, zeros.copy())
    elif rt.party == 1:
        a = BoolShare(mask, zeros)
        b = BoolShare(zeros.copy(), x.hi.copy())
    else:
        a0 = rss._from_bytes(rt.comm.recv(0), x.shape)
        a = BoolShare(zeros, a0)
        b = BoolShare(x.lo.copy(), zeros.copy())
    rt.comm.count_round()
    return a, b


def _extract_bit(words: BoolShare, i: int) -> BoolShare:
    sh = np.uint64(i)
    one = np.uint64(1)
    return BoolShare(((words.lo >> sh) & one).astype(np.uint8),
                     ((words.hi >> sh) & one).astype(np.uint8))


def a2b_msb(rt: PartyRuntime, x: ShareTensor) -> BoolShare:
    """Boolean share of the most-significant (sign) bit of x.

    Adds the two boolean operands with a ripple-carry circuit: one batched
    word-level AND produces every generate bit, then l-2 sequential single-bit
    ANDs propagate the carry into the top position.
    """
    with rt.comm.label("a2b"):
        a, b = _bool_input_operands(rt, x)
        bits = rt.ring.bits
        g = rss.and_words(rt, a, b)
        p = rss.xor(a, b)
        carry = _extract_bit(g, 0)
        for i in range(1, bits - 1):
            gi = _extract_bit(g, i)
            pi = _extract_bit(p, i)
            carry = rss.xor(gi, rss.and_bits(rt, pi, carry))
        return rss.xor(_extract_bit(p, bits - 1), carry)


def _as_diff(rt: PartyRuntime, x, y) -> ShareTensor:
    """Share of x - y where either side may be a public real (encoded)."""
    x_share = isinstance(x, ShareTensor)
    y_share = isinstance(y, ShareTensor)
    if x_share and y_share:
        return rss.sub(rt, x, y)
    if x_share:
        return rss.add_public(rt, x, rt.ring.neg(rt.ring.encode(np.float64(y))))
    if y_share:
        return rss.add_public(rt, rss.neg(rt, y), rt.ring.encode(np.float64(x)))
    raise TypeError("at least one comparison operand must be a ShareTensor")


def lt(rt: PartyRuntime, x, y) -> BoolShare:
    """Boolean share of 1{x < y} (strict); either operand may be a public
    real.  Exact whenever |x - y| fits in l-1 bits."""
    with rt.comm.label("lt"):
        return a2b_msb(rt, _as_diff(rt, x, y))


def bit_to_arith(rt: PartyRuntime, b: BoolShare) -> ShareTensor:
    """Arithmetic share of a boolean-shared bit (value 0/1, no fixed-point
    scale): beta_0 + beta_1 + beta_2 - 2(pairwise products) + 4 beta_0 beta_1
    beta_2, with each component lifted to a free arithmetic sharing."""

    def lift(j: int) -> ShareTensor:
        zeros = np.zeros(b.shape, dtype=np.uint64)
        lo = b.lo.astype(np.uint64) if rt.party == j else zeros
        hi = b.hi.astype(np.uint64) if rss.next_party(rt.party) == j else zeros.copy()
        return ShareTensor(lo, hi)

    b0, b1, b2 = lift(0), lift(1), lift(2)
    left = rss.stack([b0, b1, b0])
    right = rss.stack([b1, b2, b2])
    pair = rss.mul_raw(rt, left, right)
    p01, p12, p02 = pair[0], pair[1], pair[2]
    p012 = rss.mul_raw(rt, p01, b2)
    total = rss.add(rt, rss.add(rt, b0, b1), b2)
    cross = rss.add(rt, rss.add(rt, p01, p12), p02)
    return rss.add(rt, rss.sub(rt, total, rss.mul_public_int(rt, cross, 2)),
                   rss.mul_public_int(rt, p012, 4))


def mul_ba(rt: PartyRuntime, b: BoolShare, x: ShareTensor) -> ShareTensor:
    """Share of b * x, exact: the bit is converted to an arithmetic 0/1 and
    one multiplication without truncation applies it to x."""
    with rt.comm.label("mul_ba"):
        bit = bit_to_arith(rt, b)
        return rss.mul_raw(rt, bit, x)


def square(rt: PartyRuntime, x: ShareTensor) -> ShareTensor:
    """Fixed-point x**2 (multiply plus rescale)."""
    with rt.comm.label("square"):
        return rss.fixed_mul(rt, x, x)


def max_vec(rt: PartyRuntime, x: ShareTensor, keepdims: bool = False) -> ShareTensor:
    """Share of the maximum along the last axis via a tournament tree of
    max(a, b) = b + 1{b < a} * (a - b); log2(n) comparison levels."""
    if x.shape[-1] == 0:
        raise ValueError("max_vec needs a nonempty last axis")
    with rt.comm.label("max"):
        cur = x
        while cur.shape[-1] > 1:
            n = cur.shape[-1]
            m = n // 2
            a = cur[..., 0:2 * m:2]
            b = cur[..., 1:2 * m:2]
            bit = a2b_msb(rt, rss.sub(rt, b, a))  # 1{b < a}
            mx = rss.add(rt, b, mul_ba(rt, bit, rss.sub(rt, a, b)))
            if n % 2:
                mx = ShareTensor(
                    np.concatenate([mx.lo, cur.lo[..., -1:]], axis=-1),
                    np.concatenate([mx.hi, cur.hi[..., -1:]], axis=-1))
            cur = mx
        return cur if keepdims else cur[..., 0]


def recip(rt: PartyRuntime, z: ShareTensor, z_min: float, z_max: float) -> ShareTensor:
    """Share of 1/z for z in the public range [z_min, z_max], z_min > 0.

    Newton iteration y <- y (2 - z y) from the public start 1/z_max; the
    iteration count covers the worst-case range ratio plus slack.  Absolute
    error is a few LSBs, so the relative error grows with z (see tests for
    the locked bound).
    """
    if z_min <= 0 or z_max < z_min:
        raise ValueError("recip needs 0 < z_min <= z_max")
    with rt.comm.label("recip"):
        iters = math.ceil(math.log2(z_max / z_min)) + 6
        y = rss.const_share(rt, rt.ring.encode(np.float64(1.0 / z_max)),
                            shape=z.shape)
        two = rt.ring.encode(np.float64(2.0))
        for _ in range(iters):
            w = rss.fixed_mul(rt, z, y)
            v = rss.add_public(rt, rss.neg(rt, w), two)
            y = rss.fixed_mul(rt, y, v)
        return y
