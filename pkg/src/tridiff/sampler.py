"""Reverse-process sampling loop that runs the toy denoiser either on
replicated shares or in plain float64, plus image output.

Both modes share one control flow: the initial noise image and any per-step
reverse noise are public, seeded from the master seed, so a share run and its
plaintext twin consume identical randomness and differ only in arithmetic.
Schedule factors are public, so each reverse update costs the shares a single
batched rescaling round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Philox

from . import nonlinear, rss
from .denoiser import (
    DenoiserDims,
    DenoiserParams,
    denoiser_forward,
    time_embedding_batch,
)
from .rss import Dealer, PartyRuntime, ShareTensor, derive_key
from .ring import RingConfig
from .schedule import NoiseSchedule, make_linear_schedule
from .transport import CostReport

__all__ = [
    "PlainOps",
    "SamplerConfig",
    "SecureOps",
    "ddim_step",
    "ddim_timestep_pairs",
    "ddpm_step",
    "pgm_bytes",
    "quantize_image",
    "run_mpc_local",
    "run_mpc_tcp_party",
    "run_plain",
    "sample",
    "write_pgm",
    "write_raw",
]


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "ddim"
    steps: int = 50
    total_steps: int = 1000
    image_w: int = 28
    image_h: int = 28
    seed: int = 7
    activation: str = "silu"
    epsilon: float = 1e-6
    masked_denominator: bool = True
    dims: DenoiserDims = field(default_factory=DenoiserDims)

    def __post_init__(self):
        if self.method not in ("ddim", "ddpm"):
            raise ValueError(f"unknown sampler {self.method!r}")
        if self.method == "ddpm" and self.steps != self.total_steps:
            raise ValueError("ddpm runs every schedule step; set steps == total_steps")
        if self.method == "ddim" and not 1 <= self.steps <= self.total_steps:
            raise ValueError("ddim needs 1 <= steps <= total_steps")
        if self.image_w * self.image_h != self.dims.pixels:
            raise ValueError("image size must match the denoiser input width")

    @property
    def pixels(self) -> int:
        return self.image_w * self.image_h

    def softmax(self) -> nonlinear.SoftmaxConfig:
        return nonlinear.SoftmaxConfig(epsilon=self.epsilon,
                                       masked_denominator=self.masked_denominator)


# ---------------------------------------------------------------------------
# arithmetic backends
# ---------------------------------------------------------------------------


class PlainOps:
    """Float64 backend; ``flavor`` picks exact nonlinearities or the fitted
    twins the share protocols implement."""

    mode = "plain"

    def __init__(self, activation: str = "silu", flavor: str = "approx",
                 epsilon: float = 0.0, masked_denominator: bool = True):
        from . import approx, reference

        if flavor == "exact":
            self._act = reference.exact_activation(activation)
            self._silu = reference.exact_silu
            self._softmax = lambda x: reference.exact_softmax(x)
        elif flavor == "approx":
            self._act = approx.approx_activation(activation)
            self._silu = approx.approx_silu
            self._softmax = lambda x: approx.approx_softmax(
                x, epsilon=epsilon, masked=masked_denominator)
        else:
            raise ValueError(f"unknown flavor {flavor!r}")

    def input(self, arr):
        return np.asarray(arr, dtype=np.float64)

    def matmul(self, a, b):
        return a @ b

    def matmul_public(self, pub, b):
        return np.asarray(pub, dtype=np.float64) @ b

    def add(self, a, b):
        return a + b

    def add_public(self, a, pub):
        return a + np.asarray(pub, dtype=np.float64)

    def scale(self, a, c: float):
        return a * c

    def lincomb(self, terms, const: float = 0.0):
        acc = sum(c * t for t, c in terms)
        return acc + const if const else acc

    def activation(self, a):
        return self._act(a)

    def silu(self, a):
        return self._silu(a)

    def softmax(self, a):
        return self._softmax(a)

    def reshape(self, a, shape):
        return a.reshape(shape)

    def transpose(self, a):
        return a.T

    def output(self, a):
        return np.asarray(a, dtype=np.float64)


class SecureOps:
    """Replicated-share backend bound to one party's runtime.

    ``input`` consumes the simulated dealer stream, which every party derives
    from the same seed so each takes its own pair of one common sharing.
    """

    mode = "mpc"

    def __init__(self, rt: PartyRuntime, dealer: Dealer | None = None,
                 activation: str = "silu",
                 softmax_cfg: nonlinear.SoftmaxConfig | None = None):
        self.rt = rt
        self.dealer = dealer or Dealer(rt.ring, rt.master_seed)
        self.activation_kind = activation
        self.softmax_cfg = softmax_cfg or nonlinear.SoftmaxConfig()

    def input(self, arr):
        return self.dealer.share_reals(np.asarray(arr, dtype=np.float64))[self.rt.party]

    def matmul(self, a, b):
        return rss.fixed_matmul(self.rt, a, b)

    def matmul_public(self, pub, b):
        return rss.matmul_public(self.rt, pub, b)

    def add(self, a, b):
        return rss.add(self.rt, a, b)

    def add_public(self, a, pub):
        return rss.add_public(self.rt, a,
                              self.rt.ring.encode(np.asarray(pub, dtype=np.float64)))

    def scale(self, a, c: float):
        return rss.scale_real(self.rt, a, c)

    def lincomb(self, terms, const: float = 0.0):
        return rss.lincomb(self.rt, terms, const=const)

    def activation(self, a):
        return nonlinear.secure_activation(self.rt, a, self.activation_kind)

    def silu(self, a):
        return nonlinear.secure_silu(self.rt, a)

    def softmax(self, a):
        return nonlinear.secure_softmax(self.rt, a, self.softmax_cfg)

    def reshape(self, a: ShareTensor, shape):
        return a.reshape(shape)

    def transpose(self, a: ShareTensor):
        return a.T

    def output(self, a: ShareTensor):
        return self.rt.ring.decode(rss.open_shares(self.rt, a))


# ---------------------------------------------------------------------------
# reverse-process steps
# ---------------------------------------------------------------------------


def ddpm_step(ops, x, eps_pred, t: int, sched: NoiseSchedule, noise=None):
    """One ancestral step: posterior mean from the noise prediction plus the
    scaled public noise (omitted at t = 1).  Public schedule factors make the
    mean one batched rescale of the shares."""
    if not 1 <= t <= sched.steps:
        raise ValueError(f"t must be in [1, {sched.steps}], got {t}")
    a = 1.0 / np.sqrt(sched.alpha[t])
    b = -sched.beta[t] / np.sqrt(1.0 - sched.alpha_bar[t]) * a
    out = ops.lincomb([(x, a), (eps_pred, b)])
    if t > 1 and noise is not None:
        out = ops.add_public(out, np.sqrt(sched.beta_tilde[t]) * noise)
    return out


def ddim_step(ops, x, eps_pred, t: int, t_prev: int, sched: NoiseSchedule):
    """Deterministic implicit update (eta = 0): reconstruct the clean-image
    direction and re-noise at the earlier level, folded into two public
    scalars."""
    if not (sched.steps >= t > t_prev >= 0):
        raise ValueError(f"need steps >= t > t_prev >= 0, got t={t}, t_prev={t_prev}")
    ab_t = sched.alpha_bar[t]
    ab_p = sched.alpha_bar[t_prev]
    a = np.sqrt(ab_p / ab_t)
    b = np.sqrt(1.0 - ab_p) - a * np.sqrt(1.0 - ab_t)
    return ops.lincomb([(x, a), (eps_pred, b)])


def ddim_timestep_pairs(total_steps: int, steps: int) -> list[tuple[int, int]]:
    """Evenly spaced strictly-increasing subset of 1..T, returned as (t,
    t_prev) pairs in sampling (descending) order, ending at t_prev = 0."""
    grid = np.unique(np.round(np.linspace(0, total_steps, steps + 1)).astype(int))
    return [(int(grid[i]), int(grid[i - 1])) for i in range(len(grid) - 1, 0, -1)]


# ---------------------------------------------------------------------------
# sampling loop
# ---------------------------------------------------------------------------


def sample(ops, params: DenoiserParams, cfg: SamplerConfig,
           sched: NoiseSchedule | None = None) -> np.ndarray:
    """Run the reverse process and return the decoded float image in
    [-1, 1], shape (image_h, image_w)."""
    sched = sched or make_linear_schedule(cfg.total_steps)
    if sched.steps != cfg.total_steps:
        raise ValueError("schedule length disagrees with total_steps")
    noise_rng = np.random.Generator(Philox(key=derive_key(cfg.seed, "noise")))

    shared = {name: ops.input(params.tensors[name])
              for name in sorted(params.tensors)}
    if cfg.method == "ddim":
        pairs = ddim_timestep_pairs(cfg.total_steps, cfg.steps)
    else:
        pairs = [(t, t - 1) for t in range(cfg.total_steps, 0, -1)]
    # The time-embedding module runs once per job, covering every step.
    temb = time_embedding_batch(ops, shared, [t for t, _ in pairs], cfg.dims)

    x = ops.input(noise_rng.standard_normal(cfg.pixels))
    for t, t_prev in pairs:
        eps = denoiser_forward(ops, shared, x, temb[t], cfg.dims)
        if cfg.method == "ddim":
            x = ddim_step(ops, x, eps, t, t_prev, sched)
        else:
            noise = noise_rng.standard_normal(cfg.pixels) if t > 1 else None
            x = ddpm_step(ops, x, eps, t, sched, noise)
    img = np.clip(ops.output(x), -1.0, 1.0)
    return img.reshape(cfg.image_h, cfg.image_w)


def run_plain(params: DenoiserParams, cfg: SamplerConfig,
              sched: NoiseSchedule | None = None, flavor: str = "approx",
              frac_bits: int = 18) -> np.ndarray:
    ops = PlainOps(activation=cfg.activation, flavor=flavor,
                   epsilon=nonlinear.effective_epsilon(cfg.epsilon, frac_bits),
                   masked_denominator=cfg.masked_denominator)
    return sample(ops, params, cfg, sched)


def _mpc_program(params: DenoiserParams, cfg: SamplerConfig,
                 sched: NoiseSchedule | None):
    def program(rt: PartyRuntime):
        ops = SecureOps(rt, Dealer(rt.ring, cfg.seed),
                        activation=cfg.activation, softmax_cfg=cfg.softmax())
        with rt.comm.label("sample"):
            return sample(ops, params, cfg, sched)

    return program


def run_mpc_local(params: DenoiserParams, cfg: SamplerConfig,
                  sched: NoiseSchedule | None = None,
                  ring: RingConfig | None = None,
                  timeout: float = 120.0) -> tuple[np.ndarray, CostReport]:
    """Three in-process parties sample one image; all three reconstructions
    must agree bit-for-bit."""
    results, report = rss.spawn_local_parties(
        _mpc_program(params, cfg, sched), ring=ring or RingConfig(),
        master_seed=cfg.seed, timeout=timeout)
    for other in results[1:]:
        if not np.array_equal(results[0], other):
            raise rss.IntegrityError("parties reconstructed different images")
    return results[0], report


def run_mpc_tcp_party(party: int, addresses: list[str],
                      params: DenoiserParams, cfg: SamplerConfig,
                      sched: NoiseSchedule | None = None,
                      ring: RingConfig | None = None, config_crc: int = 0,
                      timeout: float = 30.0):
    """One TCP party of the same sampling job; returns (image, CostTracker)."""
    return rss.run_tcp_party(
        party, addresses, _mpc_program(params, cfg, sched),
        ring=ring or RingConfig(), master_seed=cfg.seed,
        config_crc=config_crc, timeout=timeout)


# ---------------------------------------------------------------------------
# image output
# ---------------------------------------------------------------------------


def quantize_image(img: np.ndarray) -> np.ndarray:
    """Map [-1, 1] floats to 8-bit grayscale."""
    return np.clip(np.round((np.clip(img, -1.0, 1.0) + 1.0) * 127.5),
                   0, 255).astype(np.uint8)


def pgm_bytes(gray: np.ndarray) -> bytes:
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + gray.tobytes()


def write_pgm(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(quantize_image(img)))


def write_raw(path, img: np.ndarray) -> None:
    """Headerless little-endian float32 dump for bit-exact diffing."""
    np.ascontiguousarray(img, dtype="<f4").tofile(path)
