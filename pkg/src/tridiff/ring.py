"""Arithmetic in Z_{2^l} plus the fixed-point encoding that maps reals onto it.

Ring values are numpy ``uint64`` arrays.  All arithmetic wraps modulo
``2**bits``; a value ``v >= 2**(bits-1)`` is read as the negative number
``v - 2**bits`` whenever a sign matters.  Reals are encoded by scaling with
``2**frac_bits`` and rounding half away from zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RangeError", "RingConfig"]

_U64_BITS = 64


class RangeError(ValueError):
    """A real value does not fit the fixed-point range."""


def _as_u64(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype != np.uint64:
        arr = arr.astype(np.int64, copy=False).view(np.uint64)
    return arr


@dataclass(frozen=True)
class RingConfig:
    """Z_{2^bits} with ``frac_bits`` fractional bits for fixed-point reals.

    ``frac_bits`` must stay below ``bits // 2`` so one product of in-range
    values fits before truncation.
    """

    bits: int = 64
    frac_bits: int = 18

    def __post_init__(self):
        if not 8 <= self.bits <= 64:
            raise ValueError(f"ring width must be in [8, 64], got {self.bits}")
        if not 0 < self.frac_bits < self.bits // 2:
            raise ValueError(
                f"frac_bits must be in (0, {self.bits // 2}), got {self.frac_bits}"
            )

    # -- basic ring facts ---------------------------------------------------

    @property
    def modulus(self) -> int:
        return 1 << self.bits

    @property
    def mask(self) -> int:
        return (1 << self.bits) - 1

    @property
    def one(self) -> int:
        """Ring representation of the real 1.0."""
        return 1 << self.frac_bits

    @property
    def scale(self) -> float:
        return float(1 << self.frac_bits)

    @property
    def max_real(self) -> float:
        """Strict upper bound on encodable magnitudes."""
        return float(1 << (self.bits - self.frac_bits - 1))

    # -- conversions --------------------------------------------------------

    def wrap(self, values) -> np.ndarray:
        arr = _as_u64(values)
        if self.bits == _U64_BITS:
            return arr
        return arr & np.uint64(self.mask)

    def to_ring(self, ints) -> np.ndarray:
        """Map python/array integers (possibly negative) into the ring."""
        arr = np.asarray(ints)
        if arr.dtype == object or arr.dtype.kind not in "iu":
            arr = np.array([int(v) & self.mask for v in np.ravel(arr)],
                           dtype=np.uint64).reshape(np.shape(ints))
            return arr
        return self.wrap(arr)

    def signed(self, values) -> np.ndarray:
        """Two's-complement reading of ring values, as int64."""
        arr = np.atleast_1d(_as_u64(values))
        if self.bits == _U64_BITS:
            return arr.view(np.int64).reshape(np.shape(values))
        shift = np.uint64(_U64_BITS - self.bits)
        return ((arr << shift).view(np.int64) >> np.int64(shift)).reshape(
            np.shape(values))

    # -- arithmetic ---------------------------------------------------------

    def add(self, a, b) -> np.ndarray:
        return self.wrap(_as_u64(a) + _as_u64(b))

    def sub(self, a, b) -> np.ndarray:
        return self.wrap(_as_u64(a) - _as_u64(b))

    def mul(self, a, b) -> np.ndarray:
        return self.wrap(_as_u64(a) * _as_u64(b))

    def neg(self, a) -> np.ndarray:
        return self.wrap(np.uint64(0) - _as_u64(a))

    def mul_int(self, a, k: int) -> np.ndarray:
        """Scale by a public integer (no rescale; k may be negative)."""
        return self.mul(a, np.uint64(k & self.mask))

    def matmul(self, a, b) -> np.ndarray:
        return self.wrap(_as_u64(a) @ _as_u64(b))

    def arshift(self, values, amount) -> np.ndarray:
        """Arithmetic right shift of the signed interpretation; ``amount``
        may be an array (broadcast elementwise)."""
        arr = np.atleast_1d(_as_u64(values))
        pad = _U64_BITS - self.bits
        sh = np.asarray(amount, dtype=np.int64) + np.int64(pad)
        shifted = (arr << np.uint64(pad)).view(np.int64) >> sh
        out = self.wrap(shifted.view(np.uint64))
        return out.reshape(np.shape(values)) if np.ndim(amount) == 0 else out

    # `truncate_local` is the plaintext reference for share truncation.
    truncate_local = arshift

    def msb(self, values) -> np.ndarray:
        """Most-significant (sign) bit of each value, as uint8 0/1."""
        arr = _as_u64(values)
        return ((arr >> np.uint64(self.bits - 1)) & np.uint64(1)).astype(np.uint8)

    # -- fixed point ---------------------------------------------------------

    def encode(self, reals) -> np.ndarray:
        """round(r * 2^f) mod 2^l, rounding half away from zero."""
        r = np.asarray(reals, dtype=np.float64)
        if not np.all(np.isfinite(r)) or np.any(np.abs(r) >= self.max_real):
            raise RangeError(
                f"real value out of range (+-{self.max_real:g}) for "
                f"{self.bits}-bit ring with {self.frac_bits} fraction bits")
        mag = np.floor(np.abs(r) * self.scale + 0.5)
        return self.wrap(np.where(r < 0, -mag, mag).astype(np.int64).view(np.uint64))

    def encode_int(self, real: float) -> int:
        """Scalar encode, returned as a plain int ring element."""
        return int(self.encode(np.asarray(real)))

    def encode_wide(self, real: float) -> int:
        """Encode at double scale 2^(2f); used for constants added before a
        truncation step."""
        v = round(float(real) * self.scale * self.scale)
        return v & self.mask

    def decode(self, values) -> np.ndarray:
        return self.signed(values).astype(np.float64) / self.scale

    def random(self, n: int, raw: np.ndarray) -> np.ndarray:
        """Mask raw uint64 randomness down to ring width."""
        return self.wrap(raw[:n])
