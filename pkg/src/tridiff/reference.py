"""Double-precision references: the textbook nonlinear functions the
protocols approximate, and the full plaintext sampling pipeline in two
flavors (exact nonlinearities, or the fitted ones the shares compute)."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

__all__ = [
    "exact_exp",
    "exact_mish",
    "exact_recip",
    "exact_relu",
    "exact_silu",
    "exact_softmax",
    "run_plain_pipeline",
]


def exact_exp(x):
    return np.exp(np.asarray(x, dtype=np.float64))


def exact_recip(x):
    return 1.0 / np.asarray(x, dtype=np.float64)


def exact_relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def exact_silu(x):
    x = np.asarray(x, dtype=np.float64)
    return x * expit(x)


def exact_mish(x):
    x = np.asarray(x, dtype=np.float64)
    return x * np.tanh(np.logaddexp(0.0, x))


def exact_softmax(x):
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def exact_activation(kind: str):
    try:
        return {"relu": exact_relu, "silu": exact_silu, "mish": exact_mish}[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


def run_plain_pipeline(params, cfg, sched=None, flavor: str = "exact"):
    """Full sampling loop in float64 with the same control flow, schedule and
    seeds as the share-based path; ``flavor`` picks exact nonlinearities or
    the fitted twins."""
    from . import sampler

    if flavor not in ("exact", "approx"):
        raise ValueError(f"unknown flavor {flavor!r}")
    return sampler.run_plain(params, cfg, sched=sched, flavor=flavor)
