"""Flat key=value run configuration shared by the drivers and party daemons.

Unknown keys are rejected to catch typos.  The config hash exchanged in the
transport handshake is the CRC32 of the canonical text (sorted keys, one
``key=value`` per line), so three parties only talk when they agree on every
parameter.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, fields

from .denoiser import DenoiserDims
from .ring import RingConfig
from .sampler import SamplerConfig

__all__ = ["ConfigError", "EngineConfig", "load_config", "parse_config_text"]


class ConfigError(ValueError):
    """Malformed configuration file."""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


@dataclass
class EngineConfig:
    ring_bits: int = 64
    fraction_bits: int = 18
    t_exp: float = -14.0
    activation: str = "silu"
    sampler: str = "ddim"
    steps: int = 50
    total_steps: int = 1000
    seed: int = 7
    image_w: int = 28
    image_h: int = 28
    epsilon: float = 1e-6
    masked_denominator: bool = True
    net_timeout: float = 30.0
    party0_addr: str = "127.0.0.1:9310"
    party1_addr: str = "127.0.0.1:9311"
    party2_addr: str = "127.0.0.1:9312"

    def __post_init__(self):
        if self.activation not in ("relu", "silu", "mish"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.sampler not in ("ddim", "ddpm"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")

    def ring(self) -> RingConfig:
        return RingConfig(bits=self.ring_bits, frac_bits=self.fraction_bits)

    def addresses(self) -> list[str]:
        return [self.party0_addr, self.party1_addr, self.party2_addr]

    def sampler_config(self) -> SamplerConfig:
        pixels = self.image_w * self.image_h
        return SamplerConfig(
            method=self.sampler, steps=self.steps, total_steps=self.total_steps,
            image_w=self.image_w, image_h=self.image_h, seed=self.seed,
            activation=self.activation, epsilon=self.epsilon,
            masked_denominator=self.masked_denominator,
            dims=DenoiserDims(pixels=pixels))

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    def crc(self) -> int:
        return zlib.crc32(self.canonical_text().encode("utf-8"))


_FIELD_TYPES = {f.name: f.type for f in fields(EngineConfig)}

_PARSERS = {
    "int": int,
    "float": float,
    "str": lambda s: s.strip(),
    "bool": _parse_bool,
}


def parse_config_text(text: str) -> EngineConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        parser = _PARSERS[_FIELD_TYPES[key]]
        try:
            values[key] = parser(value.strip())
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    try:
        return EngineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> EngineConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())
