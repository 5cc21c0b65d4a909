"""Rate-quality curve comparison and correlation statistics."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DomainError
from .optimizer import SweepCurve

log = logging.getLogger(__name__)

BD_METHOD = ("cubic least-squares fit of log10(bandwidth) against normalized quality per "
             "curve ({points}), integrated over the common quality interval")


@dataclass(frozen=True)
class CurveComparison:
    bd_rate_percent: float
    overlap: tuple[float, float]
    method_note: str = ""
    n_test: int = 0
    n_anchor: int = 0

    def to_json(self, profile: str | None = None) -> str:
        d = asdict(self)
        d["overlap"] = list(self.overlap)
        if profile is not None:
            d = {"profile": profile, **d}
        return json.dumps(d, indent=2)

    def csv_row(self, profile: str) -> str:
        lo, hi = self.overlap
        return f"{profile},{self.bd_rate_percent:.6f},{lo:.6f},{hi:.6f}"


CSV_HEADER = "profile,bd_rate_percent,overlap_lo,overlap_hi"


def pareto_mask(rates: Sequence[float], quals: Sequence[float]) -> np.ndarray:
    """True where no other point is at least as cheap and at least as good (one strictly)."""
    r = np.asarray(rates, dtype=float)
    q = np.asarray(quals, dtype=float)
    le_r = r[None, :] <= r[:, None]
    ge_q = q[None, :] >= q[:, None]
    strict = (r[None, :] < r[:, None]) | (q[None, :] > q[:, None])
    dominated = (le_r & ge_q & strict).any(axis=1)
    return ~dominated


def pareto_front(curve: SweepCurve) -> SweepCurve:
    """Drop points dominated in (lower rate, higher quality); keep order."""
    if len(curve) <= 1:
        return curve
    keep = pareto_mask(curve.bandwidths, curve.qualities)
    return replace(curve, points=[r for r, k in zip(curve.points, keep) if k])


def _prepare(curve) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(curve, SweepCurve):
        curve = pareto_front(curve.feasible())
        rates, quals = curve.bandwidths, curve.qualities
    else:
        rates, quals = (np.asarray(v, dtype=float) for v in curve)
        ok = np.isfinite(rates) & np.isfinite(quals)
        rates, quals = rates[ok], quals[ok]
        keep = pareto_mask(rates, quals)
        rates, quals = rates[keep], quals[keep]
    if np.any(rates <= 0):
        raise DomainError("rates must be positive for a log-rate comparison")
    order = np.argsort(quals, kind="stable")
    return rates[order], quals[order]


def _integral(quals, log_rates, lo, hi):
    coef = np.polyfit(quals, log_rates, 3)
    prim = np.polyint(coef)
    return np.polyval(prim, hi) - np.polyval(prim, lo)


def bd_rate(test, anchor, fit_points: str = "all") -> CurveComparison:
    """Average bandwidth difference of ``test`` relative to ``anchor`` at equal quality.

    Each argument is a :class:`SweepCurve` or a ``(rates, qualities)`` pair.
    Negative means the tested curve needs less bandwidth.  Infeasible points
    are ignored and each curve is reduced to its Pareto front first, which
    also collapses flat quality plateaus onto their cheapest point.

    ``fit_points="all"`` fits each cubic to every point of its curve, as in
    the classic Bjontegaard computation; ``"overlap"`` fits only the points
    inside the common quality interval.  Integration always runs over the
    common interval.
    """
    if fit_points not in ("all", "overlap"):
        raise DomainError(f"fit_points must be 'all' or 'overlap', got {fit_points!r}")
    rt, qt = _prepare(test)
    ra, qa = _prepare(anchor)
    if len(qt) < 4 or len(qa) < 4:
        raise DomainError("each curve needs at least 4 non-dominated points")
    lo = max(qt.min(), qa.min())
    hi = min(qt.max(), qa.max())
    if not hi > lo:
        raise DomainError(f"quality ranges do not overlap ({lo:.6g} >= {hi:.6g})")

    def inside(q):
        # a hair of slack so the endpoints that define the overlap are kept
        eps = 1e-12 * (hi - lo)
        return (q >= lo - eps) & (q <= hi + eps)

    if fit_points == "overlap":
        mt, ma = inside(qt), inside(qa)
    else:
        mt, ma = np.ones(len(qt), bool), np.ones(len(qa), bool)
    if mt.sum() < 4 or ma.sum() < 4:
        raise DomainError("fewer than 4 points of a curve fall inside the quality overlap")
    it = _integral(qt[mt], np.log10(rt[mt]), lo, hi)
    ia = _integral(qa[ma], np.log10(ra[ma]), lo, hi)
    avg = (it - ia) / (hi - lo)
    return CurveComparison(
        bd_rate_percent=100.0 * (10.0 ** avg - 1.0),
        overlap=(float(lo), float(hi)),
        method_note=BD_METHOD.format(points="all points" if fit_points == "all"
                                     else "points inside the overlap"),
        n_test=int(mt.sum()),
        n_anchor=int(ma.sum()),
    )


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    den = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if den == 0.0:
        log.warning("zero variance, correlation undefined")
        return float("nan")
    return float(np.clip(float(dx @ dy) / den, -1.0, 1.0))


def correlations(predicted: Sequence[float], measured: Sequence[float]) -> tuple[float, float]:
    """Pearson and Spearman coefficients; NaN where a side has zero variance.

    Tied values receive their average rank.
    """
    x = np.asarray(predicted, dtype=float)
    y = np.asarray(measured, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise DomainError("predicted and measured must be equal-length, non-empty 1-D sequences")
    pcc = _pearson(x, y)
    srcc = _pearson(rankdata(x), rankdata(y))
    return pcc, srcc
