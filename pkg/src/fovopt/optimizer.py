"""Bandwidth-constrained choice of the reduced-quality layer.

Given a bandwidth ``B`` and segment initialization duration ``T``, pick the
normalized stepsize ``q_hat`` (and resolution ``s_hat``) of the reduced-quality
layer that maximizes the normalized quality ``Q/Qmax`` evaluated at the
refinement duration ``tau = (r_fov + r_rl) / B * T``, subject to
``r_fov + r_rl <= B`` and ``0.05 <= q_hat <= 1``.

Three regimes are supported: continuous ``q_hat`` at native resolution,
continuous ``q_hat`` with a few discrete ``s_hat`` levels, and a fully
discrete (QP, ``s_hat``) table.  A rule-based heuristic that fixes
``s_hat`` from the bandwidth alone serves as the baseline.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, Infeasible
from .model import DEFAULT_CONSTANTS, Q_HAT_FLOOR, ModelConstants, qp_to_stepsize, quality_norm
from .rate import ContentProfile, SegmentConfig, min_rl_q_hat_for, rl_bitrate

DEFAULT_S_LEVELS = (1 / 16, 1 / 4, 1.0)
DEFAULT_QP_SET = tuple(range(22, 52))
HEURISTIC_THRESHOLDS = (1.0, 4.0)  # Mbps

# absolute slack (Mbps) on the rate constraint
RATE_TOL = 1e-9
# qualities closer than this are treated as tied
TIE_TOL = 1e-12

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    bandwidth: float
    q_opt: float
    q_hat: float
    s_hat_opt: float
    tau: float
    rl_rate: float
    total_rate: float
    q_norm: float
    feasible: bool = True
    qp_opt: int | None = None

    @classmethod
    def infeasible(cls, bandwidth: float) -> "OptimizationResult":
        nan = float("nan")
        return cls(bandwidth, nan, nan, nan, nan, nan, nan, nan, feasible=False)

    def _key(self):
        # NaN marks "no value" here, so two infeasible results compare equal
        return tuple(None if isinstance(v, float) and math.isnan(v) else v
                     for v in astuple(self))

    def __eq__(self, other):
        if not isinstance(other, OptimizationResult):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def as_row(self) -> dict:
        return {
            "B": self.bandwidth,
            "qp": "" if self.qp_opt is None else self.qp_opt,
            "q": self.q_opt,
            "q_hat": self.q_hat,
            "s_hat": self.s_hat_opt,
            "tau": self.tau,
            "rl_rate": self.rl_rate,
            "total_rate": self.total_rate,
            "q_norm": self.q_norm,
            "feasible": int(self.feasible),
        }


@dataclass
class SweepCurve:
    points: list[OptimizationResult]
    profile: str = ""
    policy: str = ""
    init_duration: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        bw = [r.bandwidth for r in self.points]
        if any(b1 <= b0 for b0, b1 in zip(bw, bw[1:])):
            raise DomainError("sweep bandwidths must be strictly increasing")

    def __len__(self):
        return len(self.points)

    @property
    def bandwidths(self) -> np.ndarray:
        return np.array([r.bandwidth for r in self.points], dtype=float)

    @property
    def qualities(self) -> np.ndarray:
        return np.array([r.q_norm for r in self.points], dtype=float)

    def feasible(self) -> "SweepCurve":
        return replace(self, points=[r for r in self.points if r.feasible])


# ---------------------------------------------------------------------------
# objective and search helpers


def objective(q_hat, s_hat, p: ContentProfile, cfg: SegmentConfig,
              c: ModelConstants = DEFAULT_CONSTANTS):
    """Normalized quality of an RL choice, ignoring the rate constraint."""
    r_rl = rl_bitrate(q_hat, s_hat, p)
    tau = (p.r_fov + r_rl) / cfg.bandwidth * cfg.init_duration
    return quality_norm(tau, q_hat, s_hat, c)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-12, max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    The endpoints are evaluated too, so a maximum sitting on the boundary
    is returned exactly.
    """
    if hi < lo:
        lo, hi = hi, lo
    best_x, best_f = lo, f(lo)
    f_hi = f(hi)
    if f_hi > best_f:
        best_x, best_f = hi, f_hi
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    for x, fx in ((x1, f1), (x2, f2)):
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def _result(p, cfg, c, q_hat, s_hat, qp=None) -> OptimizationResult:
    r_rl = rl_bitrate(q_hat, s_hat, p)
    total = p.r_fov + r_rl
    tau = total / cfg.bandwidth * cfg.init_duration
    return OptimizationResult(
        bandwidth=cfg.bandwidth,
        q_opt=c.q_min / q_hat,
        q_hat=q_hat,
        s_hat_opt=s_hat,
        tau=tau,
        rl_rate=r_rl,
        total_rate=total,
        q_norm=float(quality_norm(tau, q_hat, s_hat, c)),
        qp_opt=qp,
    )


def _pick(cands: Sequence[OptimizationResult]) -> OptimizationResult:
    """Best quality; ties go to larger s_hat, then lower RL rate."""
    top = max(r.q_norm for r in cands)
    tied = [r for r in cands if r.q_norm >= top - TIE_TOL]
    return min(tied, key=lambda r: (-r.s_hat_opt, r.rl_rate))


def _min_bandwidth(p: ContentProfile, s_levels: Iterable[float]) -> float:
    return p.r_fov + min(rl_bitrate(Q_HAT_FLOOR, s, p) for s in s_levels)


# ---------------------------------------------------------------------------
# regimes


def optimize_continuous_q(p: ContentProfile, cfg: SegmentConfig,
                          c: ModelConstants = DEFAULT_CONSTANTS, s_hat: float = 1.0,
                          n_grid: int = 2048) -> OptimizationResult:
    """Best continuous ``q_hat`` in ``[0.05, 1]`` at a fixed ``s_hat``.

    A log-uniform grid over the feasible interval locates the best bracket,
    which golden-section search then refines.  The upper end of the grid is
    the largest rate-feasible ``q_hat``, where the optimum often sits.
    """
    cap = min(1.0, min_rl_q_hat_for(p, cfg.bandwidth, s_hat))
    if cap < Q_HAT_FLOOR:
        need = p.r_fov + rl_bitrate(Q_HAT_FLOOR, s_hat, p)
        if need > cfg.bandwidth + RATE_TOL:
            raise Infeasible(f"{p.name}: needs at least {need:.6g} Mbps at s_hat={s_hat:g}, "
                             f"have {cfg.bandwidth:.6g}", min_bandwidth=need)
        cap = Q_HAT_FLOOR
    if cap <= Q_HAT_FLOOR:
        return _result(p, cfg, c, Q_HAT_FLOOR, s_hat)

    lg = np.linspace(math.log(Q_HAT_FLOOR), math.log(cap), n_grid)
    grid = np.exp(lg)
    grid[0], grid[-1] = Q_HAT_FLOOR, cap
    vals = objective(grid, s_hat, p, cfg, c)
    i = int(np.argmax(vals))
    lo, hi = lg[max(i - 1, 0)], lg[min(i + 1, n_grid - 1)]

    def f(u):
        return float(objective(min(max(math.exp(u), Q_HAT_FLOOR), cap), s_hat, p, cfg, c))

    u, fu = golden_section_max(f, lo, hi)
    q_hat = float(grid[i])
    if fu > vals[i] + TIE_TOL:
        q_hat = min(max(math.exp(u), Q_HAT_FLOOR), cap)
    return _result(p, cfg, c, q_hat, s_hat)


def optimize_discrete_s(p: ContentProfile, cfg: SegmentConfig,
                        c: ModelConstants = DEFAULT_CONSTANTS,
                        s_levels: Sequence[float] = DEFAULT_S_LEVELS,
                        n_grid: int = 2048) -> OptimizationResult:
    """Continuous ``q_hat`` at each ``s_hat`` level, best level wins."""
    cands = []
    for s in s_levels:
        try:
            cands.append(optimize_continuous_q(p, cfg, c, s_hat=s, n_grid=n_grid))
        except Infeasible:
            pass
    if not cands:
        need = _min_bandwidth(p, s_levels)
        raise Infeasible(f"{p.name}: no s_hat level fits {cfg.bandwidth:.6g} Mbps "
                         f"(needs {need:.6g})", min_bandwidth=need)
    return _pick(cands)


def optimize_fully_discrete(p: ContentProfile, cfg: SegmentConfig,
                            c: ModelConstants = DEFAULT_CONSTANTS,
                            s_levels: Sequence[float] = DEFAULT_S_LEVELS,
                            qp_set: Sequence[int] = DEFAULT_QP_SET) -> OptimizationResult:
    """Exhaustive search over every (QP, s_hat) pair.

    QPs whose stepsize falls outside ``[q_min, q_min / 0.05]`` are skipped
    (with the default ``q_min = 8`` that drops QP 48-51, whose stepsizes
    exceed 160), as are pairs that break the rate constraint.
    """
    if len(qp_set) == 0:
        raise DomainError("qp_set must not be empty")
    qps = np.array([int(qp) for qp in qp_set])
    q_hat = c.q_min / np.array([qp_to_stepsize(qp) for qp in qps])
    in_range = (q_hat >= Q_HAT_FLOOR) & (q_hat <= 1.0)
    levels = np.array([float(s) for s in s_levels])
    qq, ss = np.meshgrid(q_hat, levels)
    pp = np.broadcast_to(qps, qq.shape)
    rates = rl_bitrate(qq, ss, p)
    ok = in_range[None, :] & (p.r_fov + rates <= cfg.bandwidth + RATE_TOL)
    if not ok.any():
        need = float("nan")
        if in_range.any():
            need = p.r_fov + min(float(np.min(rl_bitrate(q_hat[in_range], s, p)))
                                 for s in s_levels)
        raise Infeasible(f"{p.name}: no (QP, s_hat) pair fits {cfg.bandwidth:.6g} Mbps",
                         min_bandwidth=need)
    qq, ss, pp, rates = qq[ok], ss[ok], pp[ok], rates[ok]
    vals = np.atleast_1d(objective(qq, ss, p, cfg, c))
    tied = np.flatnonzero(vals >= vals.max() - TIE_TOL)
    # larger s_hat first, then lower RL rate
    j = tied[np.lexsort((rates[tied], -ss[tied]))[0]]
    return _result(p, cfg, c, float(qq[j]), float(ss[j]), qp=int(pp[j]))


def optimize_joint_continuous(p: ContentProfile, cfg: SegmentConfig,
                              c: ModelConstants = DEFAULT_CONSTANTS,
                              s_range: tuple[float, float] = (1 / 16, 1.0),
                              n_s: int = 64, n_grid: int = 2048) -> OptimizationResult:
    """Both ``q_hat`` and ``s_hat`` continuous (``s_hat`` within ``s_range``).

    Used as the upper envelope of the discrete regimes.  The ``s_hat`` grid
    contains the default discrete levels, so the result is never worse than
    :func:`optimize_discrete_s` on those levels.
    """
    lo, hi = s_range
    fixed = [s for s in DEFAULT_S_LEVELS if lo <= s <= hi]
    levels = sorted(set(np.geomspace(lo, hi, n_s).tolist()) | set(fixed))
    # coarse scan over all levels, full resolution on the discrete ones and the winner
    coarse = []
    for s in levels:
        try:
            coarse.append(optimize_continuous_q(p, cfg, c, s_hat=s, n_grid=256))
        except Infeasible:
            pass
    if not coarse:
        need = _min_bandwidth(p, levels)
        raise Infeasible(f"{p.name}: no s_hat in {s_range} fits {cfg.bandwidth:.6g} Mbps",
                         min_bandwidth=need)
    s_best = _pick(coarse).s_hat_opt
    best = optimize_discrete_s(p, cfg, c, sorted(set(fixed) | {s_best}), n_grid=n_grid)
    if best.s_hat_opt not in levels:
        return best

    def f(u):
        try:
            return optimize_continuous_q(p, cfg, c, s_hat=math.exp(u), n_grid=256).q_norm
        except Infeasible:
            return -1.0

    i = levels.index(best.s_hat_opt)
    a = math.log(levels[max(i - 1, 0)])
    b = math.log(levels[min(i + 1, len(levels) - 1)])
    u, _ = golden_section_max(f, a, b, tol=1e-9)
    try:
        refined = optimize_continuous_q(p, cfg, c, s_hat=math.exp(u), n_grid=n_grid)
    except Infeasible:
        return best
    return refined if refined.q_norm > best.q_norm + TIE_TOL else best


def heuristic_policy(bandwidth: float, thresholds: tuple[float, float] = HEURISTIC_THRESHOLDS,
                     levels: Sequence[float] = DEFAULT_S_LEVELS) -> float:
    """Resolution picked from bandwidth alone: 1/16 below 1 Mbps, 1/4 below 4, else 1."""
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    low, high = thresholds
    if bandwidth < low:
        return levels[0]
    if bandwidth < high:
        return levels[1]
    return levels[2]


def optimize_heuristic(p: ContentProfile, cfg: SegmentConfig,
                       c: ModelConstants = DEFAULT_CONSTANTS,
                       qp_set: Sequence[int] = DEFAULT_QP_SET,
                       q_mode: str = "discrete", n_grid: int = 2048) -> OptimizationResult:
    """Heuristic resolution, then the best stepsize at that resolution.

    ``q_mode="discrete"`` searches ``qp_set``; ``"continuous"`` searches
    ``q_hat`` continuously.
    """
    s = heuristic_policy(cfg.bandwidth)
    if q_mode == "discrete":
        return optimize_fully_discrete(p, cfg, c, s_levels=(s,), qp_set=qp_set)
    if q_mode == "continuous":
        return optimize_continuous_q(p, cfg, c, s_hat=s, n_grid=n_grid)
    raise DomainError(f"unknown q_mode {q_mode!r}")


# ---------------------------------------------------------------------------
# policies and sweeps

POLICIES = ("model-continuous", "model-discrete-s", "model-fully-discrete", "heuristic")


def solve(policy: str, p: ContentProfile, cfg: SegmentConfig,
          c: ModelConstants = DEFAULT_CONSTANTS, *,
          s_levels: Sequence[float] = DEFAULT_S_LEVELS,
          qp_set: Sequence[int] = DEFAULT_QP_SET,
          heuristic_q: str = "discrete",
          n_grid: int = 2048) -> OptimizationResult:
    """Dispatch to the optimizer named by ``policy``. Raises :class:`Infeasible`."""
    if policy == "model-continuous":
        return optimize_continuous_q(p, cfg, c, s_hat=1.0, n_grid=n_grid)
    if policy == "model-discrete-s":
        return optimize_discrete_s(p, cfg, c, s_levels, n_grid=n_grid)
    if policy == "model-fully-discrete":
        return optimize_fully_discrete(p, cfg, c, s_levels, qp_set)
    if policy == "heuristic":
        return optimize_heuristic(p, cfg, c, qp_set, q_mode=heuristic_q, n_grid=n_grid)
    raise DomainError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")


def default_bandwidth_grid(p: ContentProfile, n: int = 200, eps: float = 1e-3) -> np.ndarray:
    """``n`` log-spaced bandwidths from ``max(eps, r_fov)`` to ``4 * (r_fov + r_max)``."""
    return np.geomspace(max(eps, p.r_fov), 4.0 * (p.r_fov + p.r_max), n)


def sweep(p: ContentProfile, c: ModelConstants, policy: str,
          bandwidths: Sequence[float], init_duration: float,
          workers: int = 1, **opts) -> SweepCurve:
    """Solve ``policy`` at every bandwidth.

    Infeasible bandwidths stay in the curve with ``feasible=False``.
    """
    grid = [float(b) for b in bandwidths]
    if not grid:
        raise DomainError("bandwidth grid is empty")
    if any(b1 <= b0 for b0, b1 in zip(grid, grid[1:])):
        raise DomainError("bandwidth grid must be strictly increasing")
    if policy not in POLICIES:
        raise DomainError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")

    def one(b):
        try:
            return solve(policy, p, SegmentConfig(b, init_duration), c, **opts)
        except Infeasible:
            return OptimizationResult.infeasible(b)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(one, grid))
    else:
        points = [one(b) for b in grid]
    meta = {k: list(v) if isinstance(v, (tuple, list)) else v for k, v in sorted(opts.items())}
    return SweepCurve(points, profile=p.name, policy=policy, init_duration=float(init_duration),
                      meta=meta)
