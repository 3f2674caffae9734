"""Noise schedule for the forward/reverse diffusion processes.

Arrays are indexed by timestep t in 1..T, with index 0 holding the
conventional sentinels beta_0 = 0, alpha_0 = 1, alpha_bar_0 = 1 so reverse
updates can refer to t-1 uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseSchedule", "make_linear_schedule", "q_sample"]


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule and its derived sequences.

    alpha_t = 1 - beta_t, alpha_bar_t is the running product, and
    beta_tilde_t = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t is the
    reverse-step posterior variance.
    """

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    beta_tilde: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.beta) - 1


def make_linear_schedule(steps: int, beta_start: float = 1e-4,
                         beta_end: float = 0.02) -> NoiseSchedule:
    """Linearly spaced variances from beta_start to beta_end inclusive."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    beta = np.concatenate([[0.0], np.linspace(beta_start, beta_end, steps)])
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    beta_tilde = np.zeros_like(beta)
    beta_tilde[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar,
                         beta_tilde=beta_tilde)


def q_sample(x0, t: int, noise, sched: NoiseSchedule):
    """Forward noising in closed form: sqrt(abar_t) x0 + sqrt(1-abar_t) eps."""
    if not 1 <= t <= sched.steps:
        raise ValueError(f"t must be in [1, {sched.steps}], got {t}")
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if x0.shape != noise.shape:
        raise ValueError("x0 and noise must have matching shapes")
    ab = sched.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise
