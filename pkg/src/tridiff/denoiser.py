"""Toy denoiser network executable either on replicated shares or in plain
float64, and its bit-exact parameter file.

Architecture (matmul-only so it maps directly onto share multiplication):
input projection -> two residual blocks (linear -> activation -> linear plus
skip, with the time embedding added before the activation) -> one attention
block over ``tokens`` slices of the hidden vector (query/key/value/output
projections, scaled scores, softmax, value mix, skip) -> output projection.

Parameter file: magic ``CDM1``, u32 tensor count; per tensor u16 name length,
UTF-8 name, u8 rank, u32 dims, float32 little-endian data; trailing CRC32 of
everything before it.  All integers little-endian.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Philox

from .rss import derive_key

__all__ = [
    "DenoiserDims",
    "DenoiserParams",
    "ParamFormatError",
    "denoiser_forward",
    "load_params",
    "random_params",
    "save_params",
    "sinusoidal_embedding",
    "zero_params",
]

PARAM_MAGIC = b"CDM1"


class ParamFormatError(ValueError):
    """Parameter file is malformed or fails its checksum."""


@dataclass(frozen=True)
class DenoiserDims:
    pixels: int = 784
    hidden: int = 64
    tokens: int = 4
    emb_dim: int = 32

    @property
    def token_dim(self) -> int:
        return self.hidden // self.tokens

    def shapes(self) -> dict[str, tuple[int, ...]]:
        h, p, e, d = self.hidden, self.pixels, self.emb_dim, self.token_dim
        shapes: dict[str, tuple[int, ...]] = {
            "time_w1": (e, h), "time_b1": (h,),
            "time_w2": (h, h), "time_b2": (h,),
            "in_w": (p, h), "in_b": (h,),
        }
        for k in (1, 2):
            shapes[f"res{k}_w1"] = (h, h)
            shapes[f"res{k}_b1"] = (h,)
            shapes[f"res{k}_w2"] = (h, h)
            shapes[f"res{k}_b2"] = (h,)
        for name in ("wq", "wk", "wv", "wo"):
            shapes[f"attn_{name}"] = (d, d)
        shapes["out_w"] = (h, p)
        shapes["out_b"] = (p,)
        return shapes


@dataclass
class DenoiserParams:
    """Named float64 tensors plus the activation the blocks apply."""

    tensors: dict[str, np.ndarray]
    activation: str = "silu"
    dims: DenoiserDims = field(default_factory=DenoiserDims)

    def __post_init__(self):
        expected = self.dims.shapes()
        if set(self.tensors) != set(expected):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ValueError(f"bad tensor set: missing {missing}, extra {extra}")
        for name, shape in expected.items():
            if tuple(self.tensors[name].shape) != shape:
                raise ValueError(
                    f"tensor {name}: expected shape {shape}, "
                    f"got {tuple(self.tensors[name].shape)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def zero_params(dims: DenoiserDims = DenoiserDims(),
                activation: str = "silu") -> DenoiserParams:
    return DenoiserParams(
        {n: np.zeros(s) for n, s in dims.shapes().items()},
        activation=activation, dims=dims)


def random_params(seed: int = 0, dims: DenoiserDims = DenoiserDims(),
                  activation: str = "silu") -> DenoiserParams:
    """Seeded untrained weights, scaled ~1/sqrt(fan_in) to keep all hidden
    values comfortably inside the fixed-point range."""
    rng = np.random.Generator(Philox(key=derive_key(seed, "params")))
    tensors = {}
    for name, shape in dims.shapes().items():
        if name.endswith(("_b", "_b1", "_b2", "b")) or len(shape) == 1:
            tensors[name] = np.zeros(shape)
        else:
            fan_in = shape[0]
            tensors[name] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
    return DenoiserParams(tensors, activation=activation, dims=dims)


# ---------------------------------------------------------------------------
# parameter file
# ---------------------------------------------------------------------------


def save_params(path, params: DenoiserParams) -> None:
    body = bytearray()
    body += PARAM_MAGIC
    body += struct.pack("<I", len(params.tensors))
    for name in sorted(params.tensors):
        arr = np.ascontiguousarray(params.tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        body += struct.pack("<H", len(encoded))
        body += encoded
        body += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            body += struct.pack("<I", dim)
        body += arr.tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def load_params(path, activation: str = "silu",
                dims: DenoiserDims = DenoiserDims()) -> DenoiserParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != PARAM_MAGIC:
        raise ParamFormatError(f"{path}: not a parameter file (bad magic)")
    stored = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored:
        raise ParamFormatError(f"{path}: checksum mismatch")
    view = memoryview(blob)[:-4]
    off = 4
    (count,) = struct.unpack_from("<I", view, off)
    off += 4
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", view, off)
            off += 2
            name = bytes(view[off:off + name_len]).decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<B", view, off)
            off += 1
            shape = struct.unpack_from(f"<{rank}I", view, off)
            off += 4 * rank
            n = int(np.prod(shape, dtype=np.int64)) if rank else 1
            arr = np.frombuffer(view, dtype="<f4", count=n, offset=off)
            off += 4 * n
            tensors[name] = arr.astype(np.float64).reshape(shape)
    except (struct.error, ValueError) as exc:
        raise ParamFormatError(f"{path}: truncated tensor table") from exc
    if off != len(view):
        raise ParamFormatError(f"{path}: trailing bytes after tensor table")
    return DenoiserParams(tensors, activation=activation, dims=dims)


# ---------------------------------------------------------------------------
# forward pass (backend-polymorphic)
# ---------------------------------------------------------------------------


def sinusoidal_embedding(timesteps, dim: int,
                         max_period: float = 10_000.0) -> np.ndarray:
    """Public positional embedding: [sin(t * w_k), cos(t * w_k)] with
    geometrically decaying frequencies."""
    ts = np.atleast_1d(np.asarray(timesteps, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / half)
    args = ts[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=-1)
    if np.ndim(timesteps) == 0:
        return emb[0]
    return emb


def time_embedding_batch(ops, shared, timesteps, dims: DenoiserDims):
    """Run the timestep MLP once for a whole list of steps; returns a mapping
    t -> embedding tensor.  The module runs once per sampling job, not once
    per step."""
    emb = sinusoidal_embedding(np.asarray(timesteps, dtype=np.float64),
                               dims.emb_dim)
    h = ops.add(ops.matmul_public(emb, shared["time_w1"]), shared["time_b1"])
    h = ops.silu(h)
    out = ops.add(ops.matmul(h, shared["time_w2"]), shared["time_b2"])
    return {int(t): out[i] for i, t in enumerate(timesteps)}


def denoiser_forward(ops, shared, x, temb, dims: DenoiserDims = DenoiserDims()):
    """Noise prediction for one flattened image; ``ops`` supplies share or
    plain-float semantics, ``shared`` holds the parameter tensors in ops
    form, ``temb`` the per-step time embedding."""
    h = ops.add(ops.matmul(x, shared["in_w"]), shared["in_b"])
    for k in (1, 2):
        u = ops.add(ops.add(ops.matmul(h, shared[f"res{k}_w1"]),
                            shared[f"res{k}_b1"]), temb)
        u = ops.activation(u)
        u = ops.add(ops.matmul(u, shared[f"res{k}_w2"]), shared[f"res{k}_b2"])
        h = ops.add(h, u)

    tokens = ops.reshape(h, (dims.tokens, dims.token_dim))
    q = ops.matmul(tokens, shared["attn_wq"])
    k_ = ops.matmul(tokens, shared["attn_wk"])
    v = ops.matmul(tokens, shared["attn_wv"])
    scores = ops.scale(ops.matmul(q, ops.transpose(k_)),
                       1.0 / np.sqrt(dims.token_dim))
    weights = ops.softmax(scores)
    mixed = ops.matmul(ops.matmul(weights, v), shared["attn_wo"])
    h = ops.add(h, ops.reshape(mixed, (dims.hidden,)))

    return ops.add(ops.matmul(h, shared["out_w"]), shared["out_b"])
