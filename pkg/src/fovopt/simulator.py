"""Trace-driven replay of FoV switches under an adaptation policy.

Each FoV switch is one decision: read the bandwidth the throughput estimate
reports at that instant, price the new FoV's high-layer tiles, and let the
policy pick the reduced-layer representation.  Buffering and segment timing
are not modelled.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DomainError, Infeasible
from .model import DEFAULT_CONSTANTS, ModelConstants
from .optimizer import OptimizationResult, solve
from .rate import ContentProfile, SegmentConfig, fov_bitrate


@dataclass(frozen=True)
class BandwidthTrace:
    times: tuple[float, ...]
    bandwidths: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in self.times)
        b = tuple(float(x) for x in self.bandwidths)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "bandwidths", b)
        if len(t) != len(b):
            raise DomainError("trace times and bandwidths differ in length")
        if not t:
            raise DomainError("empty bandwidth trace")
        if any(t1 <= t0 for t0, t1 in zip(t, t[1:])):
            raise DomainError("trace times must be strictly increasing")
        if not all(math.isfinite(x) for x in t):
            raise DomainError("trace times must be finite")
        if not all(x > 0 and math.isfinite(x) for x in b):
            raise DomainError("trace bandwidths must be positive")

    @classmethod
    def constant(cls, bandwidth: float, duration: float = 1.0) -> "BandwidthTrace":
        return cls((0.0, float(duration)), (bandwidth, bandwidth))

    @property
    def span(self) -> tuple[float, float]:
        return self.times[0], self.times[-1]

    def at(self, t: float) -> float:
        """Last sample at or before ``t``."""
        lo, hi = self.span
        if not lo <= t <= hi:
            raise DomainError(f"time {t} outside trace span [{lo}, {hi}]")
        return self.bandwidths[bisect.bisect_right(self.times, t) - 1]


@dataclass(frozen=True)
class FovEvent:
    time: float
    tile_rates: tuple[float, ...]
    dt: float | None = None  # navigation time; recorded, not used

    def __post_init__(self):
        rates = tuple(float(x) for x in self.tile_rates)
        object.__setattr__(self, "tile_rates", rates)
        object.__setattr__(self, "time", float(self.time))
        if not (self.time >= 0 and math.isfinite(self.time)):
            raise DomainError(f"event time must be >= 0, got {self.time}")
        if any(not (r >= 0 and math.isfinite(r)) for r in rates):
            raise DomainError(f"tile rates must be >= 0, got {rates}")

    @property
    def r_fov(self) -> float:
        return fov_bitrate(self.tile_rates)


@dataclass(frozen=True)
class EventResult:
    time: float
    bandwidth: float
    r_fov: float
    result: OptimizationResult

    def as_row(self) -> dict:
        r = self.result
        return {
            "time": self.time,
            "B": self.bandwidth,
            "r_fov": self.r_fov,
            "qp": "" if r.qp_opt is None else r.qp_opt,
            "q": r.q_opt,
            "s_hat": r.s_hat_opt,
            "tau": r.tau,
            "q_norm": r.q_norm,
            "feasible": int(r.feasible),
        }


@dataclass
class SessionReport:
    events: list[EventResult]
    profile: str = ""
    policy: str = ""
    init_duration: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def rows(self) -> list[dict]:
        return [e.as_row() for e in self.events]

    def summary(self) -> dict:
        q = [e.result.q_norm for e in self.events if e.result.feasible]
        return {
            "profile": self.profile,
            "policy": self.policy,
            "T": self.init_duration,
            "n_events": len(self.events),
            "n_infeasible": sum(not e.result.feasible for e in self.events),
            "mean_q_norm": math.fsum(q) / len(q) if q else None,
            "min_q_norm": min(q) if q else None,
        }


def simulate(trace: BandwidthTrace, events: Sequence[FovEvent], p: ContentProfile,
             policy: str, init_duration: float, c: ModelConstants = DEFAULT_CONSTANTS,
             **opts) -> SessionReport:
    """Replay ``events`` against ``trace`` and record the policy's decision at each.

    The profile's FoV rate is replaced by each event's tile total.  Extra
    keyword arguments go to :func:`fovopt.optimizer.solve`.  Events the
    bandwidth cannot carry are kept and flagged infeasible.
    """
    lo, hi = trace.span
    outside = [e for e in events if not lo <= e.time <= hi]
    if outside:
        listed = ", ".join(f"t={e.time:g}" for e in outside)
        raise DomainError(f"events outside trace span [{lo:g}, {hi:g}]: {listed}")
    out = []
    for e in events:
        bw = trace.at(e.time)
        r_fov = e.r_fov
        cfg = SegmentConfig(bw, init_duration)
        try:
            res = solve(policy, p.with_fov(r_fov), cfg, c, **opts)
        except Infeasible:
            res = OptimizationResult.infeasible(bw)
        out.append(EventResult(e.time, bw, r_fov, res))
    return SessionReport(out, profile=p.name, policy=policy,
                         init_duration=float(init_duration))
