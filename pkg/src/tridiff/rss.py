"""2-out-of-3 replicated secret sharing over Z_{2^l}.

A secret x is split into x0 + x1 + x2 (mod 2^l); party i holds the pair
(x_i, x_{i+1}), so each party's ``hi`` component equals the next party's
``lo``.  Linear operations are local; multiplication costs one ring element
per party in a single round, masked by a pairwise-PRF zero sharing; share
truncation after a fixed-point product is the probabilistic local variant
(one reshare round, +-1 LSB error).

Boolean sharing is the same scheme over Z_2 with xor/and in place of +/*.

All interactive functions take a :class:`PartyRuntime` first and must be
invoked by the three parties in lockstep.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.random import Philox

from .ring import RingConfig
from .transport import (
    CostReport,
    CostTracker,
    IntegrityError,
    LocalFabric,
    ProtocolAbort,
    TcpComm,
    TransportError,
    tcp_connect_mesh,
)

__all__ = [
    "BoolShare",
    "CorrelatedRandomness",
    "Dealer",
    "PartyRuntime",
    "ShareTensor",
    "add",
    "add_public",
    "affine_const",
    "and_bits",
    "and_words",
    "bnot",
    "const_share",
    "fixed_matmul",
    "fixed_mul",
    "lincomb",
    "mul_public_int",
    "mul_raw",
    "matmul_raw",
    "neg",
    "open_shares",
    "reconstruct",
    "reconstruct_bits",
    "run_tcp_party",
    "scale_real",
    "spawn_local_parties",
    "stack",
    "sub",
    "sum_last",
    "truncate",
    "xor",
]

N_PARTIES = 3


def next_party(i: int) -> int:
    return (i + 1) % N_PARTIES


def prev_party(i: int) -> int:
    return (i + 2) % N_PARTIES


# ---------------------------------------------------------------------------
# share containers
# ---------------------------------------------------------------------------


@dataclass
class ShareTensor:
    """One party's two additive components of an arithmetic sharing.

    ``lo`` is this party's own component x_i, ``hi`` is the replicated copy
    of the next party's x_{i+1}.  Both are uint64 arrays of equal shape.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.uint64)
        self.hi = np.asarray(self.hi, dtype=np.uint64)
        if self.lo.shape != self.hi.shape:
            raise ValueError("share components must have equal shapes")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.lo.shape

    def reshape(self, *shape) -> "ShareTensor":
        return ShareTensor(self.lo.reshape(*shape), self.hi.reshape(*shape))

    def transpose(self, *axes) -> "ShareTensor":
        return ShareTensor(self.lo.transpose(*axes), self.hi.transpose(*axes))

    @property
    def T(self) -> "ShareTensor":
        return self.transpose()

    def __getitem__(self, key) -> "ShareTensor":
        return ShareTensor(self.lo[key], self.hi[key])

    def copy(self) -> "ShareTensor":
        return ShareTensor(self.lo.copy(), self.hi.copy())


@dataclass
class BoolShare:
    """Replicated sharing over Z_2.

    Components are uint8 arrays of 0/1 when ``width == 1`` (one secret bit
    per element) or uint64 arrays when ``width == 64`` (bit-packed words, one
    ring value's bits per element).
    """

    lo: np.ndarray
    hi: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.lo.shape

    def __getitem__(self, key) -> "BoolShare":
        return BoolShare(self.lo[key], self.hi[key])

    def reshape(self, *shape) -> "BoolShare":
        return BoolShare(self.lo.reshape(*shape), self.hi.reshape(*shape))


def stack(shares: Sequence[ShareTensor]) -> ShareTensor:
    return ShareTensor(np.stack([s.lo for s in shares]),
                       np.stack([s.hi for s in shares]))


def stack_bits(shares: Sequence[BoolShare]) -> BoolShare:
    return BoolShare(np.stack([s.lo for s in shares]),
                     np.stack([s.hi for s in shares]))


# ---------------------------------------------------------------------------
# randomness: pairwise PRF seeds, zero sharings, dealer
# ---------------------------------------------------------------------------


def derive_key(master_seed: int, tag: str) -> list[int]:
    """128-bit PRF key (two u64 words) bound to a tag."""
    digest = hashlib.sha256(f"{master_seed}|{tag}".encode()).digest()
    return [int.from_bytes(digest[i:i + 8], "little") for i in (0, 8)]


def _prf_words(key: list[int], counter: int, n: int) -> np.ndarray:
    return Philox(key=key, counter=[0, 0, 0, counter]).random_raw(n)


class CorrelatedRandomness:
    """Setup-phase randomness: party i shares seed_i with party i+1.

    Every method consumes one value of a global message counter; the three
    parties must call them at identical protocol points so counters stay in
    lockstep, which is what makes the per-counter outputs correlated:
    the arithmetic masks alpha_i = PRF(seed_i) - PRF(seed_{i-1}) sum to zero,
    and the boolean variants xor to zero.
    """

    def __init__(self, party: int, master_seed: int, ring: RingConfig):
        self.party = party
        self.ring = ring
        self.seed_with_next = derive_key(master_seed, f"pair-{party}")
        self.seed_with_prev = derive_key(master_seed, f"pair-{prev_party(party)}")
        self.counter = 0

    def _tick(self) -> int:
        ctr = self.counter
        self.counter += 1
        return ctr

    def zero_arith(self, shape) -> np.ndarray:
        ctr = self._tick()
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        a = _prf_words(self.seed_with_next, ctr, n)
        b = _prf_words(self.seed_with_prev, ctr, n)
        return self.ring.sub(a, b).reshape(shape)

    def zero_words(self, shape) -> np.ndarray:
        ctr = self._tick()
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        a = _prf_words(self.seed_with_next, ctr, n)
        b = _prf_words(self.seed_with_prev, ctr, n)
        return self.ring.wrap(a ^ b).reshape(shape)

    def zero_bits(self, shape) -> np.ndarray:
        words = self.zero_words(shape)
        return (words & np.uint64(1)).astype(np.uint8)

    def input_mask_words(self, owner: int, shape):
        """PRF words known to ``owner`` and ``owner+1`` (None elsewhere)."""
        ctr = self._tick()
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if self.party == owner:
            return self.ring.wrap(_prf_words(self.seed_with_next, ctr, n)).reshape(shape)
        if self.party == next_party(owner):
            return self.ring.wrap(_prf_words(self.seed_with_prev, ctr, n)).reshape(shape)
        return None


class Dealer:
    """Client-side sharing of cleartext tensors into replicated triples.

    In a deployment the enquirer and model owner run this; in tests and the
    simulated-outsourcing drivers every party derives the same dealer stream
    from the master seed and keeps only its own pair.
    """

    def __init__(self, ring: RingConfig, seed: int = 0):
        self.ring = ring
        self._rng = np.random.Generator(Philox(key=derive_key(seed, "dealer")))

    def _uniform(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = self._rng.integers(0, 2 ** 63, size=2 * n, dtype=np.uint64)
        words = (raw[:n] << np.uint64(1)) ^ (raw[n:] & np.uint64(1))
        return self.ring.wrap(words).reshape(shape)

    def share(self, values) -> tuple[ShareTensor, ShareTensor, ShareTensor]:
        v = self.ring.wrap(np.asarray(values, dtype=np.uint64))
        x0 = self._uniform(v.shape)
        x1 = self._uniform(v.shape)
        x2 = self.ring.sub(self.ring.sub(v, x0), x1)
        return (ShareTensor(x0, x1), ShareTensor(x1, x2), ShareTensor(x2, x0))

    def share_reals(self, reals):
        return self.share(self.ring.encode(reals))

    def share_bits(self, bits) -> tuple[BoolShare, BoolShare, BoolShare]:
        b = np.asarray(bits, dtype=np.uint8)
        r0 = (self._uniform(b.shape) & np.uint64(1)).astype(np.uint8)
        r1 = (self._uniform(b.shape) & np.uint64(1)).astype(np.uint8)
        r2 = b ^ r0 ^ r1
        return (BoolShare(r0, r1), BoolShare(r1, r2), BoolShare(r2, r0))


def reconstruct(ring: RingConfig, shares: Sequence[ShareTensor]) -> np.ndarray:
    """Recombine the three parties' pairs; raises on replication mismatch."""
    if len(shares) != N_PARTIES:
        raise ValueError("need exactly three party shares")
    for i in range(N_PARTIES):
        if not np.array_equal(shares[i].hi, shares[next_party(i)].lo):
            raise IntegrityError(
                f"replication mismatch between parties {i} and {next_party(i)}")
    total = ring.add(ring.add(shares[0].lo, shares[1].lo), shares[2].lo)
    return total


def reconstruct_bits(shares: Sequence[BoolShare]) -> np.ndarray:
    for i in range(N_PARTIES):
        if not np.array_equal(shares[i].hi, shares[next_party(i)].lo):
            raise IntegrityError(
                f"replication mismatch between parties {i} and {next_party(i)}")
    return shares[0].lo ^ shares[1].lo ^ shares[2].lo


# ---------------------------------------------------------------------------
# party runtime and harnesses
# ---------------------------------------------------------------------------


class PartyRuntime:
    """Everything one party needs to run protocols: its id, a transport
    endpoint, the ring, and correlated randomness."""

    def __init__(self, party: int, comm, ring: RingConfig, master_seed: int = 0):
        self.party = party
        self.comm = comm
        self.ring = ring
        self.master_seed = master_seed
        self.zs = CorrelatedRandomness(party, master_seed, ring)

    @property
    def next(self) -> int:
        return next_party(self.party)

    @property
    def prev(self) -> int:
        return prev_party(self.party)


def _to_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<u8").tobytes()


def _from_bytes(data: bytes, shape) -> np.ndarray:
    return np.frombuffer(data, dtype="<u8").astype(np.uint64).reshape(shape)


def _exchange_prev(rt: PartyRuntime, arr: np.ndarray) -> np.ndarray:
    """Send this party's array to the previous party, receive the next
    party's; the backbone of multiplication/resharing.  One round."""
    rt.comm.send(rt.prev, _to_bytes(arr))
    data = rt.comm.recv(rt.next)
    rt.comm.count_round()
    return _from_bytes(data, arr.shape)


def spawn_local_parties(program: Callable[[PartyRuntime], object], *,
                        ring: RingConfig | None = None, master_seed: int = 0,
                        timeout: float = 30.0):
    """Run three copies of ``program`` concurrently over in-process channels.

    Returns (results, merged CostReport).  If a party raises, the harness
    closes the fabric, joins the rest, and raises ProtocolAbort naming the
    originating party.
    """
    ring = ring or RingConfig()
    fabric = LocalFabric(timeout=timeout)
    trackers = [CostTracker(i) for i in range(N_PARTIES)]
    runtimes = [
        PartyRuntime(i, fabric.comm(i, trackers[i]), ring, master_seed)
        for i in range(N_PARTIES)
    ]
    results: list[object] = [None] * N_PARTIES
    errors: dict[int, BaseException] = {}

    def run(i: int) -> None:
        try:
            results[i] = program(runtimes[i])
        except BaseException as exc:  # noqa: BLE001 - surfaced via ProtocolAbort
            errors[i] = exc
            fabric.close()

    threads = [threading.Thread(target=run, args=(i,), daemon=True)
               for i in range(N_PARTIES)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        # Prefer the root cause over follow-on channel-closed errors.
        originators = [i for i, e in errors.items()
                       if not isinstance(e, TransportError)]
        party = min(originators) if originators else min(errors)
        raise ProtocolAbort(party, errors[party]) from errors[party]
    return results, CostReport.merge(trackers)


def run_tcp_party(party: int, addresses: list[str],
                  program: Callable[[PartyRuntime], object], *,
                  ring: RingConfig | None = None, master_seed: int = 0,
                  config_crc: int = 0, timeout: float = 30.0):
    """Run one party of a TCP deployment; returns (result, its CostTracker).

    Semantics are identical to the local harness: same messages, same
    accounting (handshake and framing excluded).
    """
    ring = ring or RingConfig()
    socks = tcp_connect_mesh(party, addresses, config_crc, timeout=timeout)
    comm = TcpComm(party, socks)
    rt = PartyRuntime(party, comm, ring, master_seed)
    try:
        result = program(rt)
    finally:
        comm.close()
    return result, comm.cost


# ---------------------------------------------------------------------------
# local (non-interactive) operations
# ---------------------------------------------------------------------------


def add(rt: PartyRuntime, a: ShareTensor, b: ShareTensor) -> ShareTensor:
    return ShareTensor(rt.ring.add(a.lo, b.lo), rt.ring.add(a.hi, b.hi))


def sub(rt: PartyRuntime, a: ShareTensor, b: ShareTensor) -> ShareTensor:
    return ShareTensor(rt.ring.sub(a.lo, b.lo), rt.ring.sub(a.hi, b.hi))


def neg(rt: PartyRuntime, a: ShareTensor) -> ShareTensor:
    return ShareTensor(rt.ring.neg(a.lo), rt.ring.neg(a.hi))


def sum_last(rt: PartyRuntime, a: ShareTensor, keepdims: bool = False) -> ShareTensor:
    return ShareTensor(rt.ring.wrap(a.lo.sum(axis=-1, keepdims=keepdims)),
                       rt.ring.wrap(a.hi.sum(axis=-1, keepdims=keepdims)))


def add_public(rt: PartyRuntime, a: ShareTensor, const) -> ShareTensor:
    """Add a public ring constant; absorbed into the x_0 component, which
    party 0 holds as ``lo`` and party 2 holds as the replicated ``hi``."""
    c = rt.ring.to_ring(const)
    shape = np.broadcast_shapes(a.shape, c.shape)
    lo = np.broadcast_to(a.lo, shape)
    hi = np.broadcast_to(a.hi, shape)
    if rt.party == 0:
        lo = rt.ring.add(lo, c)
    if rt.party == 2:
        hi = rt.ring.add(hi, c)
    return ShareTensor(np.ascontiguousarray(lo), np.ascontiguousarray(hi))


def mul_public_int(rt: PartyRuntime, a: ShareTensor, k: int) -> ShareTensor:
    """Scale by a public integer; exact, no rescaling round."""
    return ShareTensor(rt.ring.mul_int(a.lo, k), rt.ring.mul_int(a.hi, k))


def mul_public_ring(rt: PartyRuntime, a: ShareTensor, c) -> ShareTensor:
    """Componentwise product with public ring values (broadcasts)."""
    c = rt.ring.to_ring(c)
    return ShareTensor(rt.ring.mul(a.lo, c), rt.ring.mul(a.hi, c))


def affine_const(rt: PartyRuntime, a: ShareTensor, c1, c3) -> ShareTensor:
    """c1 * [[x]] + c3 for public ring constants; local.  If c1 carries a
    fixed-point scale the caller truncates afterwards."""
    return add_public(rt, mul_public_ring(rt, a, c1), c3)


def const_share(rt: PartyRuntime, const, shape=None) -> ShareTensor:
    """Trivial sharing (c, 0, 0) of a public ring constant."""
    c = rt.ring.to_ring(const)
    if shape is not None:
        c = np.broadcast_to(c, shape).copy()
    zero = np.zeros_like(c)
    if rt.party == 0:
        return ShareTensor(c, zero)
    if rt.party == 2:
        return ShareTensor(zero, c)
    return ShareTensor(zero, zero.copy())


def const_share_reals(rt: PartyRuntime, reals) -> ShareTensor:
    return const_share(rt, rt.ring.encode(np.asarray(reals, dtype=np.float64)))


# ---------------------------------------------------------------------------
# interactive arithmetic protocols
# ---------------------------------------------------------------------------


def _reshare(rt: PartyRuntime, z_local: np.ndarray) -> ShareTensor:
    """Mask a 3-out-of-3 additive term with a zero share and redistribute to
    replicated form: each party sends its masked term to the previous party.
    One round, one ring element per party per tensor element."""
    masked = rt.ring.add(z_local, rt.zs.zero_arith(z_local.shape))
    received = _exchange_prev(rt, masked)
    return ShareTensor(masked, received)


def mul_raw(rt: PartyRuntime, a: ShareTensor, b: ShareTensor) -> ShareTensor:
    """Share of the exact ring product a*b (no rescaling).

    Party i computes z_i = a_i b_i + a_{i+1} b_i + a_i b_{i+1}, masks it and
    sends to party i-1; the masked terms form the new replicated sharing.
    """
    with rt.comm.label("mul"):
        shape = np.broadcast_shapes(a.shape, b.shape)
        z = rt.ring.add(
            rt.ring.add(rt.ring.mul(a.lo, b.lo), rt.ring.mul(a.hi, b.lo)),
            rt.ring.mul(a.lo, b.hi))
        z = np.broadcast_to(z, shape).copy()
        return _reshare(rt, z)


def matmul_raw(rt: PartyRuntime, a: ShareTensor, b: ShareTensor) -> ShareTensor:
    """Matrix-product analogue of :func:`mul_raw` (no rescaling)."""
    with rt.comm.label("matmul"):
        z = rt.ring.add(
            rt.ring.add(rt.ring.matmul(a.lo, b.lo), rt.ring.matmul(a.hi, b.lo)),
            rt.ring.matmul(a.lo, b.hi))
        return _reshare(rt, z)


def truncate(rt: PartyRuntime, a: ShareTensor, amount=None) -> ShareTensor:
    """Probabilistic share truncation: reconstructs to (value >> amount) with
    at most 1 LSB of error.  ``amount`` may vary per element.

    Party 0 shifts its own component, party 1 shifts the two-component sum it
    already holds, party 2 contributes zero; one reshare round restores
    replication.  Values must stay well below 2^(bits-1): the wrap event has
    probability |value| / 2^bits and then the result is garbage (documented,
    not signalled).
    """
    amount = rt.ring.frac_bits if amount is None else amount
    with rt.comm.label("trunc"):
        if rt.party == 0:
            y = rt.ring.arshift(a.lo, amount)
        elif rt.party == 1:
            y = rt.ring.arshift(rt.ring.add(a.lo, a.hi), amount)
        else:
            y = np.zeros_like(a.lo)
        return _reshare(rt, y)


def fixed_mul(rt: PartyRuntime, a: ShareTensor, b: ShareTensor) -> ShareTensor:
    """Fixed-point product: multiply then drop frac_bits.  Two rounds."""
    return truncate(rt, mul_raw(rt, a, b))


def fixed_matmul(rt: PartyRuntime, a: ShareTensor, b: ShareTensor) -> ShareTensor:
    return truncate(rt, matmul_raw(rt, a, b))


def scale_real(rt: PartyRuntime, a: ShareTensor, c: float) -> ShareTensor:
    """Multiply by a public real: local scaling plus one truncation round."""
    return truncate(rt, mul_public_ring(rt, a, rt.ring.encode(np.float64(c))))


def _prescale_bits(ring: RingConfig, coef: float, bound) -> int:
    """Bits to shift a term's value down (and its coefficient's encoding up)
    so the two quantization errors balance; 0 when no bound is given."""
    if bound is None or bound <= 0 or coef == 0:
        return 0
    s = round(0.5 * np.log2(bound / (2.0 * abs(coef))))
    return int(max(0, min(s, ring.frac_bits - 2)))


def lincomb(rt: PartyRuntime, terms: Sequence[tuple[ShareTensor, float]],
            const: float = 0.0, bounds: Sequence[float] | None = None) -> ShareTensor:
    """sum_i c_i * t_i + const for public reals c_i, accumulated at double
    scale and truncated once.

    Encoding a tiny coefficient at frac_bits loses up to |t_i| * 2^-(f+1) of
    absolute precision, so callers evaluating polynomials pass ``bounds``
    (the max |value| of each term where the result matters): such terms are
    pre-shifted down by s bits in one batched truncation while their
    coefficients are encoded at frac_bits + s, which keeps products at double
    scale and the quantization error at a few LSBs.
    """
    if not terms:
        raise ValueError("lincomb needs at least one term")
    f = rt.ring.frac_bits
    shape = np.broadcast_shapes(*[t.shape for t, _ in terms])
    shifts = [_prescale_bits(rt.ring, coef,
                             bounds[i] if bounds is not None else None)
              for i, (_, coef) in enumerate(terms)]
    if any(shifts):
        idx = [i for i, s in enumerate(shifts) if s]
        stacked = stack([ShareTensor(np.broadcast_to(terms[i][0].lo, shape),
                                     np.broadcast_to(terms[i][0].hi, shape))
                         for i in idx])
        amounts = np.array([shifts[i] for i in idx],
                           dtype=np.int64).reshape(-1, *([1] * len(shape)))
        rescaled = truncate(rt, stacked, amounts)
        replaced = dict(zip(idx, (rescaled[k] for k in range(len(idx)))))
    else:
        replaced = {}
    acc = ShareTensor(np.zeros(shape, dtype=np.uint64),
                      np.zeros(shape, dtype=np.uint64))
    for i, (tensor, coef) in enumerate(terms):
        if coef == 0:
            continue
        tensor = replaced.get(i, tensor)
        c_enc = round(float(coef) * (1 << (f + shifts[i]))) & rt.ring.mask
        scaled = mul_public_ring(rt, tensor, np.uint64(c_enc))
        acc = add(rt, acc, ShareTensor(np.broadcast_to(scaled.lo, shape),
                                       np.broadcast_to(scaled.hi, shape)))
    if const:
        acc = add_public(rt, acc, rt.ring.encode_wide(const))
    return truncate(rt, acc)


def matmul_public(rt: PartyRuntime, pub_reals, b: ShareTensor) -> ShareTensor:
    """(public reals) @ [[B]]: local integer matmuls plus one truncation."""
    p = rt.ring.encode(np.asarray(pub_reals, dtype=np.float64))
    prod = ShareTensor(rt.ring.matmul(p, b.lo), rt.ring.matmul(p, b.hi))
    return truncate(rt, prod)


def open_shares(rt: PartyRuntime, a: ShareTensor) -> np.ndarray:
    """Reveal the value to all parties: each sends its own component to the
    next party, completing everyone's three components.  One round."""
    rt.comm.send(rt.next, _to_bytes(a.lo))
    missing = _from_bytes(rt.comm.recv(rt.prev), a.lo.shape)
    rt.comm.count_round()
    return rt.ring.add(rt.ring.add(a.lo, a.hi), missing)


# ---------------------------------------------------------------------------
# boolean sharing operations
# ---------------------------------------------------------------------------


def xor(a: BoolShare, b: BoolShare) -> BoolShare:
    return BoolShare(a.lo ^ b.lo, a.hi ^ b.hi)


def bnot(rt: PartyRuntime, a: BoolShare) -> BoolShare:
    """Complement: flip the b_0 component (held by parties 0 and 2)."""
    one = np.uint64(1) if a.lo.dtype == np.uint64 else np.uint8(1)
    lo, hi = a.lo, a.hi
    if rt.party == 0:
        lo = lo ^ one
    if rt.party == 2:
        hi = hi ^ one
    return BoolShare(lo, hi)


def _and_core(rt: PartyRuntime, a: BoolShare, b: BoolShare,
              zero_fn, pack_fn, unpack_fn) -> BoolShare:
    z = (a.lo & b.lo) ^ (a.hi & b.lo) ^ (a.lo & b.hi) ^ zero_fn(a.lo.shape)
    rt.comm.send(rt.prev, pack_fn(z))
    received = unpack_fn(rt.comm.recv(rt.next), z.shape)
    rt.comm.count_round()
    return BoolShare(z, received)


def and_words(rt: PartyRuntime, a: BoolShare, b: BoolShare) -> BoolShare:
    """Bitwise AND on word-packed boolean shares; one round, one word per
    party per element."""
    with rt.comm.label("and"):
        return _and_core(rt, a, b, rt.zs.zero_words, _to_bytes, _from_bytes)


def _pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def _unpack_bits(data: bytes, shape) -> np.ndarray:
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    flat = np.unpackbits(np.frombuffer(data, dtype=np.uint8),
                         count=n, bitorder="little")
    return flat.reshape(shape)


def and_bits(rt: PartyRuntime, a: BoolShare, b: BoolShare) -> BoolShare:
    """AND on single-bit shares, batched across elements; payload is the
    packed bit vector."""
    with rt.comm.label("and"):
        return _and_core(rt, a, b, rt.zs.zero_bits, _pack_bits, _unpack_bits)


def open_bits(rt: PartyRuntime, a: BoolShare) -> np.ndarray:
    rt.comm.send(rt.next, _pack_bits(a.lo))
    missing = _unpack_bits(rt.comm.recv(rt.prev), a.lo.shape)
    rt.comm.count_round()
    return a.lo ^ a.hi ^ missing
