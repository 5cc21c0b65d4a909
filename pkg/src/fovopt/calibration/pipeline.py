"""Ratings -> screened MOS -> fitted model constants."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from ..errors import DomainError, FitError
from ..metrics import correlations
from ..model import DEFAULT_CONSTANTS, ModelConstants, quality, quality_norm
from .fitting import FitResult, ParamFit, fit_decay, fit_param_functions
from .ratings import MosPoint, RatingRecord, aggregate_mos, zscore_normalize
from .screening import ConsistencyResult, drop_subjects, screen_bt500, screen_consistency

log = logging.getLogger(__name__)

# kind -> (scale attribute, family, ModelConstants fields for a and b)
_FAMILY = {
    "q": ("q_hat", "butterworth", "k_aq", "k_bq"),
    "s": ("s_hat", "exponential", "k_as", "k_bs"),
}


@dataclass
class CalibrationReport:
    constants: ModelConstants
    mos: list[MosPoint]
    rejected_bt500: dict[str, set[str]]
    consistency: ConsistencyResult
    decay_fits: dict[tuple[str, float], FitResult] = field(default_factory=dict)
    rmse_staged: float = float("nan")
    rmse_final: float = float("nan")
    param_fits: dict[str, ParamFit] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "constants": self.constants.to_json_dict(),
            "bt500_rejected": {v: sorted(s) for v, s in sorted(self.rejected_bt500.items())},
            "consistency_removed": sorted("/".join(k) for k in self.consistency.removed),
            "consistency_replaced": len(self.consistency.replaced),
            "decay_fits": [
                {"kind": k, "scale": s, "a": f.a, "b": f.b, "rmse": f.rmse, "n_points": f.n_points}
                for (k, s), f in sorted(self.decay_fits.items())
            ],
            "param_fits": {
                name: {"family": f.family, "k1": f.k1, "k2": f.k2, "k3": f.k3,
                       "rmse": f.rmse, "degenerate": f.degenerate}
                for name, f in sorted(self.param_fits.items())
            },
            "n_mos_points": len(self.mos),
            "rmse_staged": self.rmse_staged,
            "rmse_final": self.rmse_final,
            "notes": list(self.notes),
        }


def screen_and_aggregate(ratings: Sequence[RatingRecord], *, grouping: str = "viewer",
                         ddof: int = 1):
    """Z-scores, BT.500 rejection, consistency repair, then MOS per cell."""
    cells = sorted({(r.video_id, r.kind, r.q_hat, r.s_hat, r.tau) for r in ratings})
    scored = zscore_normalize(ratings, grouping=grouping, ddof=ddof)
    rejected = screen_bt500(scored)
    kept = drop_subjects(ratings, rejected)
    cons = screen_consistency(kept)
    mos = aggregate_mos(cons.ratings, cells=cells)
    return mos, rejected, cons


def calibrate(ratings: Sequence[RatingRecord], *, q_max: float | None = None,
              grouping: str = "viewer", ddof: int = 1,
              base: ModelConstants = DEFAULT_CONSTANTS, refine: bool = True) -> CalibrationReport:
    """Run the full calibration pipeline.

    Decay curves are fitted per test condition, pooling the MOS of all videos
    that share it, on ``MOS / q_max``.  The fitted ``(a, b)`` values then give
    the Butterworth (quantization) and exponential (resolution) parameter
    functions.  Families without enough distinct levels keep the constants
    of ``base``; the report's notes say which.

    With ``refine`` set, all twelve constants are then polished together by
    least squares on the normalized MOS of every q-, s- and joint-test
    point, starting from the staged estimates.  Near the reference level
    the decay is almost linear in ``tau``, so ``a`` and ``b`` are poorly
    separated there and the staged fit alone can be rough.
    """
    if not ratings:
        raise DomainError("no ratings")
    q_max = base.q_max_mos if q_max is None else float(q_max)
    mos, rejected, cons = screen_and_aggregate(ratings, grouping=grouping, ddof=ddof)
    report = CalibrationReport(constants=base, mos=mos, rejected_bt500=rejected,
                               consistency=cons)

    points: dict = defaultdict(list)
    for m in mos:
        if m.kind in _FAMILY:
            scale = getattr(m, _FAMILY[m.kind][0])
            points[(m.kind, scale)].append((m.tau, m.mos / q_max))
    for key in sorted(points):
        tau, y = zip(*points[key])
        try:
            report.decay_fits[key] = fit_decay(tau, y)
        except FitError as exc:
            report.notes.append(f"decay fit skipped for {key}: {exc}")

    changes = {}
    for kind, (_, family, a_field, b_field) in _FAMILY.items():
        triples = [(scale, f.a, f.b) for (k, scale), f in sorted(report.decay_fits.items())
                   if k == kind]
        try:
            fits = fit_param_functions(triples, family)
        except FitError as exc:
            report.notes.append(f"{kind}-test: {exc}; keeping base constants")
            continue
        report.param_fits[a_field[2:]] = fits["a"]
        report.param_fits[b_field[2:]] = fits["b"]
        if fits["a"].degenerate or fits["b"].degenerate:
            report.notes.append(f"{kind}-test: degenerate parameter fit; keeping base constants")
            continue
        trial = {a_field: fits["a"].k, b_field: fits["b"].k}
        try:
            base.with_(**trial)
        except DomainError as exc:
            report.notes.append(f"{kind}-test: fitted constants rejected ({exc}); "
                                "keeping base constants")
            continue
        changes.update(trial)
    staged = base.with_(q_max_mos=q_max, **changes)
    report.constants = staged
    if refine:
        report.constants = _refine(mos, staged, report)
    for note in report.notes:
        log.warning(note)
    return report


_FIELDS = ("k_aq", "k_bq", "k_as", "k_bs")
# k_aq, k_bq are all-positive (fitted in log space); in k_as, k_bs only k1 is
_LOG = np.array([True] * 6 + [True, False, False, True, False, False])


def _pack(c: ModelConstants) -> np.ndarray:
    k = np.array([v for f in _FIELDS for v in getattr(c, f)], dtype=float)
    return np.where(_LOG, np.log(np.maximum(k, 1e-300)), k)


def _unpack(x: np.ndarray, c: ModelConstants) -> ModelConstants:
    k = np.where(_LOG, np.exp(x), x)
    return c.with_(**{f: tuple(float(v) for v in k[3 * i:3 * i + 3])
                      for i, f in enumerate(_FIELDS)})


def _refine(mos: Sequence[MosPoint], start: ModelConstants, report) -> ModelConstants:
    pts = [m for m in mos if m.kind in ("q", "s", "joint")]
    if len(pts) < 12:
        report.notes.append("too few MOS points for joint refinement; staged constants kept")
        return start
    tau = np.array([m.tau for m in pts])
    qh = np.array([m.q_hat for m in pts])
    sh = np.array([m.s_hat for m in pts])
    y = np.array([m.mos for m in pts]) / start.q_max_mos

    def resid(x):
        try:
            return quality_norm(tau, qh, sh, _unpack(x, start)) - y
        except DomainError:
            return np.ones_like(y)  # worse than any admissible fit

    r0 = resid(_pack(start))
    f0 = float(r0 @ r0)
    report.rmse_staged = math.sqrt(f0 / len(pts))
    lo = np.where(_LOG, -50.0, -np.inf)
    res = least_squares(resid, _pack(start), bounds=(lo, -lo), method="trf", x_scale="jac",
                        max_nfev=4000)
    best = start
    if 2.0 * res.cost < f0:
        best = _unpack(res.x, start)
    r1 = resid(_pack(best))
    report.rmse_final = math.sqrt(float(r1 @ r1) / len(pts))
    return best


def cross_validate(mos: Sequence[MosPoint], c: ModelConstants = DEFAULT_CONSTANTS,
                   kind: str | None = "joint"):
    """Correlate model predictions with measured MOS.

    Returns ``(pcc, srcc, predicted, measured)``; ``kind=None`` uses every point.
    """
    pts = [m for m in mos if kind is None or m.kind == kind]
    if not pts:
        raise DomainError(f"no MOS points of kind {kind!r}")
    pred = np.array([quality(m.tau, m.q_hat, m.s_hat, c) for m in pts])
    meas = np.array([m.mos for m in pts])
    pcc, srcc = correlations(pred, meas)
    return pcc, srcc, pred, meas
