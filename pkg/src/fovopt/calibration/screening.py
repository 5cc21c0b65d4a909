"""Subject screening: BT.500 outlier rejection and rating-consistency checks."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ratings import RatingRecord, with_score

log = logging.getLogger(__name__)

# axis index in RatingRecord.cell, and +1 when a larger value is a better condition
_AXES = ((0, +1), (1, +1), (2, -1))


# ---------------------------------------------------------------------------
# BT.500 post-screening


def _kurtosis(x: np.ndarray) -> float:
    d = x - x.mean()
    m2 = float(np.mean(d ** 2))
    if m2 == 0.0:
        return float("nan")
    return float(np.mean(d ** 4)) / (m2 * m2)


def screen_bt500(scored: Sequence[tuple[RatingRecord, float]], *, min_subjects: int = 3,
                 reject_fraction: float = 0.05, balance_ratio: float = 0.3
                 ) -> dict[str, set[str]]:
    """Subjects to drop per video, by the BT.500 post-screening rule.

    For each processed sample the standardized scores get a mean ``u``,
    standard deviation ``s`` and kurtosis ``b2``.  A score counts toward
    ``P`` when it is at least ``u + k*s`` and toward ``Q`` when at most
    ``u - k*s``, with ``k = 2`` for ``2 <= b2 <= 4`` (near-normal) and
    ``k = sqrt(20)`` otherwise.  A subject is rejected when
    ``(P + Q) / N > 0.05`` and ``|P - Q| / (P + Q) < 0.3``, ``N`` being the
    number of samples the subject rated.
    """
    per_video: dict = defaultdict(lambda: defaultdict(dict))
    for r, z in scored:
        per_video[r.video_id][r.pvs_id][r.subject_id] = z

    rejected: dict[str, set[str]] = {}
    for video, pvs_map in per_video.items():
        subjects = sorted({s for m in pvs_map.values() for s in m})
        if len(subjects) < min_subjects:
            log.warning("video %s: only %d subjects, BT.500 screening skipped",
                        video, len(subjects))
            rejected[video] = set()
            continue
        P = dict.fromkeys(subjects, 0)
        Q = dict.fromkeys(subjects, 0)
        N = dict.fromkeys(subjects, 0)
        for m in pvs_map.values():
            x = np.array(list(m.values()), dtype=float)
            for s in m:
                N[s] += 1
            if x.size < 2:
                continue
            u = x.mean()
            sd = float(np.std(x, ddof=1))
            if sd == 0.0:
                continue
            b2 = _kurtosis(x)
            k = 2.0 if 2.0 <= b2 <= 4.0 else math.sqrt(20.0)
            for s, v in m.items():
                if v >= u + k * sd:
                    P[s] += 1
                elif v <= u - k * sd:
                    Q[s] += 1
        out = set()
        for s in subjects:
            pq = P[s] + Q[s]
            if N[s] and pq / N[s] > reject_fraction and abs(P[s] - Q[s]) / pq < balance_ratio:
                out.add(s)
        if out:
            log.info("video %s: BT.500 rejects subjects %s", video, sorted(out))
        rejected[video] = out
    return rejected


def drop_subjects(ratings: Iterable[RatingRecord],
                  rejected: dict[str, set[str]]) -> list[RatingRecord]:
    return [r for r in ratings if r.subject_id not in rejected.get(r.video_id, ())]


# ---------------------------------------------------------------------------
# consistency screening


def violations(cells: dict[tuple, float]) -> list[tuple[tuple, tuple]]:
    """Pairs ``(better, worse)`` where the better condition got the strictly lower score.

    Two cells are compared when they differ in exactly one of ``q_hat``,
    ``s_hat``, ``tau``; higher ``q_hat``/``s_hat`` and shorter ``tau`` are
    better.
    """
    keys = sorted(cells)
    out = []
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            diff = [ax for ax in range(3) if a[ax] != b[ax]]
            if len(diff) != 1:
                continue
            ax = diff[0]
            sign = _AXES[ax][1]
            better, worse = (a, b) if (a[ax] - b[ax]) * sign > 0 else (b, a)
            if cells[better] < cells[worse]:
                out.append((better, worse))
    return out


def inconsistent_cells(cells: dict[tuple, float]) -> set[tuple]:
    """Greedy set of cells whose removal leaves no violation.

    Repeatedly flags the cell taking part in the most remaining violations,
    breaking ties by the total score gap of those violations, then by cell
    order.
    """
    remaining = violations(cells)
    flagged: set = set()
    while remaining:
        count: dict = defaultdict(int)
        gap: dict = defaultdict(float)
        for b, w in remaining:
            d = cells[w] - cells[b]
            for c in (b, w):
                count[c] += 1
                gap[c] += d
        pick = min(count, key=lambda c: (-count[c], -gap[c], c))
        flagged.add(pick)
        remaining = [(b, w) for b, w in remaining if pick not in (b, w)]
    return flagged


def neighbor_mean(cells: dict[tuple, float], cell: tuple, flagged: set) -> float | None:
    """Mean of the nearest unflagged cells along each axis, both directions."""
    vals = []
    for ax, _ in _AXES:
        line = [c for c in cells if all(c[i] == cell[i] for i in range(3) if i != ax)]
        lower = [c for c in line if c[ax] < cell[ax] and c not in flagged]
        upper = [c for c in line if c[ax] > cell[ax] and c not in flagged]
        if lower:
            vals.append(cells[max(lower, key=lambda c: c[ax])])
        if upper:
            vals.append(cells[min(upper, key=lambda c: c[ax])])
    if not vals:
        return None
    return float(np.mean(vals))


@dataclass
class ConsistencyResult:
    ratings: list[RatingRecord]
    # keys are (video_id, subject_id, kind)
    removed: set[tuple[str, str, str]] = field(default_factory=set)
    replaced: list[tuple[RatingRecord, float]] = field(default_factory=list)
    counts: dict[tuple[str, str, str], int] = field(default_factory=dict)


def screen_consistency(ratings: Iterable[RatingRecord],
                       max_fraction: float = 1 / 8) -> ConsistencyResult:
    """Drop inconsistent subjects and repair isolated outliers, per (video, subject, kind).

    A subject is removed for a video when more than ``max_fraction`` of the
    cells they rated are inconsistent (so more than 3 of 24, or more than 1
    of 12).  In the subjects that stay, each inconsistent cell is replaced by
    the mean of its nearest consistent neighbours along the ``q_hat``,
    ``s_hat`` and ``tau`` axes.
    """
    result = ConsistencyResult(ratings=[])
    for key, recs in sorted(_matrices(ratings).items()):
        cells = {r.cell: float(r.score) for r in recs}
        flagged = inconsistent_cells(cells)
        result.counts[key] = len(flagged)
        if len(flagged) > max_fraction * len(cells):
            log.info("video %s subject %s: %d of %d ratings inconsistent, subject removed",
                     key[0], key[1], len(flagged), len(cells))
            result.removed.add(key)
            continue
        for r in recs:
            if r.cell in flagged:
                new = neighbor_mean(cells, r.cell, flagged)
                if new is not None:
                    result.replaced.append((r, new))
                    log.info("video %s subject %s: cell %s score %g replaced by %g",
                             key[0], key[1], r.cell, r.score, new)
                    r = with_score(r, new)
            result.ratings.append(r)
    return result


def _matrices(ratings: Iterable[RatingRecord]) -> dict[tuple[str, str, str], list[RatingRecord]]:
    out: dict = defaultdict(list)
    for r in ratings:
        out[(r.video_id, r.subject_id, r.kind)].append(r)
    return dict(out)


def inconsistency_count(ratings: Iterable[RatingRecord]) -> int:
    """Total inconsistent cells over all (video, subject, kind) rating matrices."""
    return sum(len(inconsistent_cells({r.cell: float(r.score) for r in recs}))
               for recs in _matrices(ratings).values())
