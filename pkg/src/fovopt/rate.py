"""Bitrate of the reduced-quality layer, FoV bitrate and refinement duration.

All rates are in Mbps and all durations in seconds.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, InputError

log = logging.getLogger(__name__)

PROFILES_ENV = "FOVOPT_PROFILES"

_UNIT_SCALE = {"bps": 1e-6, "kbps": 1e-3, "mbps": 1.0, "gbps": 1e3}


@dataclass(frozen=True)
class ContentProfile:
    name: str
    r_max: float
    alpha: float
    beta: float
    r_fov: float
    tile_rates: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.r_max > 0:
            raise DomainError(f"{self.name}: r_max must be positive")
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError(f"{self.name}: alpha and beta must be positive")
        if not self.r_fov >= 0:
            raise DomainError(f"{self.name}: r_fov must be non-negative")
        if self.tile_rates is not None:
            tiles = tuple(float(r) for r in self.tile_rates)
            object.__setattr__(self, "tile_rates", tiles)
            if abs(math.fsum(tiles) - self.r_fov) > 1e-9 * self.r_fov:
                raise DomainError(f"{self.name}: tile rates sum to {math.fsum(tiles)}, "
                                  f"not r_fov={self.r_fov}")

    def with_fov(self, r_fov: float) -> "ContentProfile":
        return ContentProfile(self.name, self.r_max, self.alpha, self.beta, r_fov)


@dataclass(frozen=True)
class SegmentConfig:
    bandwidth: float  # B, Mbps
    init_duration: float  # T, seconds

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.init_duration > 0:
            raise DomainError(f"init_duration must be positive, got {self.init_duration}")


def rl_bitrate(q_hat, s_hat, p: ContentProfile):
    """Rate of the reduced-quality layer: ``r_max * q_hat**alpha * s_hat**beta``."""
    if isinstance(q_hat, float) and isinstance(s_hat, float):
        if not (q_hat > 0 and s_hat > 0):
            raise DomainError("q_hat and s_hat must be positive")
        return p.r_max * q_hat ** p.alpha * s_hat ** p.beta
    q = np.asarray(q_hat, dtype=float)
    s = np.asarray(s_hat, dtype=float)
    if np.any(~(q > 0)) or np.any(~(s > 0)):
        raise DomainError("q_hat and s_hat must be positive")
    r = p.r_max * np.power(q, p.alpha) * np.power(s, p.beta)
    return float(r) if r.ndim == 0 else r


def fov_bitrate(tile_rates: Sequence[float]) -> float:
    """Total high-quality rate of the tiles covering the FoV."""
    rates = [float(r) for r in tile_rates]
    if not rates:
        log.warning("empty FoV tile list, FoV bitrate is 0")
        return 0.0
    if any(not r >= 0 for r in rates):
        raise DomainError("tile rates must be non-negative")
    return math.fsum(rates)


def refinement_duration(r_fov, r_rl, cfg: SegmentConfig):
    """Seconds needed to fetch one segment of HL + RL at bandwidth ``cfg.bandwidth``."""
    if not cfg.bandwidth > 0:
        raise DomainError("bandwidth must be positive")
    total = np.add(r_fov, r_rl)
    if np.any(~(total >= 0)):
        raise DomainError("rates must be non-negative")
    tau = total / cfg.bandwidth * cfg.init_duration
    return float(tau) if np.ndim(tau) == 0 else tau


def min_rl_q_hat_for(p: ContentProfile, bandwidth: float, s_hat: float = 1.0) -> float:
    """Largest ``q_hat`` whose total rate fits ``bandwidth``, or 0 when none does."""
    spare = bandwidth - p.r_fov
    if spare <= 0:
        return 0.0
    return (spare / (p.r_max * s_hat ** p.beta)) ** (1.0 / p.alpha)


# ---------------------------------------------------------------------------
# profile files


def _profile_from_dict(d: dict, src: str, idx: int) -> ContentProfile:
    try:
        unit = str(d.get("rate_unit", "Mbps")).lower()
        if unit not in _UNIT_SCALE:
            raise InputError(f"profile #{idx}: unknown rate_unit {d['rate_unit']!r}", path=src)
        k = _UNIT_SCALE[unit]
        tiles = d.get("tile_rates")
        tiles = None if tiles is None else tuple(float(r) * k for r in tiles)
        r_fov = d.get("r_fov")
        if r_fov is None:
            if tiles is None:
                raise InputError(f"profile #{idx}: needs r_fov or tile_rates", path=src)
            r_fov = math.fsum(tiles)
        else:
            r_fov = float(r_fov) * k
        return ContentProfile(
            name=str(d["name"]),
            r_max=float(d["r_max"]) * k,
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            r_fov=r_fov,
            tile_rates=tiles,
        )
    except KeyError as exc:
        raise InputError(f"profile #{idx}: missing field {exc.args[0]!r}", path=src) from exc
    except (DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"profile #{idx}: {exc}", path=src) from exc


def parse_profiles(text: str, src: str = "<string>") -> list[ContentProfile]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, path=src, line=exc.lineno) from exc
    if not isinstance(doc, list):
        raise InputError("profile file must hold a JSON array", path=src)
    return [_profile_from_dict(d, src, i) for i, d in enumerate(doc)]


def load_profiles(path: str | Path | None = None) -> list[ContentProfile]:
    """Load a profile set.

    Resolution order: explicit ``path``, then ``$FOVOPT_PROFILES``, then the
    bundled eight-profile set.
    """
    if path is None:
        path = os.environ.get(PROFILES_ENV) or None
    if path is None:
        text = resources.files("fovopt").joinpath("profiles/table2.json").read_text()
        return parse_profiles(text, "<bundled profiles/table2.json>")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read profiles: {exc.strerror}", path=str(path)) from exc
    return parse_profiles(text, str(path))


def bundled_profiles() -> list[ContentProfile]:
    text = resources.files("fovopt").joinpath("profiles/table2.json").read_text()
    return parse_profiles(text, "<bundled profiles/table2.json>")


def published_bd_rates() -> dict[str, float]:
    """Per-profile BD-rate values listed alongside the bundled profiles (percent)."""
    text = resources.files("fovopt").joinpath("profiles/table2.json").read_text()
    return {d["name"]: d["bd_rate_published"] for d in json.loads(text) if "bd_rate_published" in d}


def get_profile(name: str, profiles: Iterable[ContentProfile] | None = None) -> ContentProfile:
    profiles = list(load_profiles() if profiles is None else profiles)
    for p in profiles:
        if p.name == name:
            return p
    for p in profiles:
        if p.name.lower() == name.lower():
            return p
    known = ", ".join(p.name for p in profiles)
    raise KeyError(f"unknown profile {name!r} (known: {known})")
