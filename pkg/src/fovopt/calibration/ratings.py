"""Raw subjective ratings: records, CSV I/O, Z-scores and MOS aggregation."""
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .._csv import read_table
from ..errors import DomainError, InputError

log = logging.getLogger(__name__)

KINDS = ("q", "s", "joint")
_KIND_ALIASES = {"q": "q", "q-test": "q", "s": "s", "s-test": "s", "joint": "joint"}
CSV_FIELDS = ("video_id", "pvs_id", "subject_id", "kind", "q_hat", "s_hat", "tau", "score")


@dataclass(frozen=True)
class RatingRecord:
    video_id: str
    pvs_id: str
    subject_id: str
    kind: str
    q_hat: float
    s_hat: float
    tau: float
    score: float

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind)
        if kind is None:
            raise DomainError(f"unknown test kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not (0 < self.q_hat <= 1 and 0 < self.s_hat <= 1):
            raise DomainError(f"condition scales must lie in (0, 1], got "
                              f"q_hat={self.q_hat}, s_hat={self.s_hat}")
        if not self.tau >= 0:
            raise DomainError(f"tau must be non-negative, got {self.tau}")
        if not 1 <= self.score <= 5:
            raise DomainError(f"score must lie in [1, 5], got {self.score}")

    @property
    def cell(self) -> tuple[float, float, float]:
        return (self.q_hat, self.s_hat, self.tau)

    @property
    def condition(self) -> tuple[str, float, float]:
        return (self.kind, self.q_hat, self.s_hat)


@dataclass(frozen=True)
class MosPoint:
    video_id: str
    kind: str
    q_hat: float
    s_hat: float
    tau: float
    mos: float
    stddev: float
    n_subjects: int


def read_ratings_csv(path: str | Path) -> list[RatingRecord]:
    """Read ratings with header ``video_id,pvs_id,subject_id,kind,q_hat,s_hat,tau,score``."""
    src = str(path)
    _, rows = read_table(path, CSV_FIELDS, "ratings")
    out = []
    for lineno, row in rows:
        try:
            out.append(RatingRecord(
                video_id=row["video_id"],
                pvs_id=row["pvs_id"],
                subject_id=row["subject_id"],
                kind=row["kind"],
                q_hat=float(row["q_hat"]),
                s_hat=float(row["s_hat"]),
                tau=float(row["tau"]),
                score=float(row["score"]),
            ))
        except ValueError as exc:
            raise InputError(str(exc) or "malformed row", path=src, line=lineno) from exc
    return out


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_ratings_csv(ratings: Iterable[RatingRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in ratings:
            w.writerow([r.video_id, r.pvs_id, r.subject_id, r.kind,
                        repr(r.q_hat), repr(r.s_hat), repr(r.tau), _fmt(r.score)])


# ---------------------------------------------------------------------------


def _std(x: np.ndarray, ddof: int) -> float:
    if x.size - ddof <= 0:
        return 0.0
    return float(np.std(x, ddof=ddof))


def zscore_normalize(ratings: Sequence[RatingRecord], grouping: str = "viewer",
                     ddof: int = 1) -> list[tuple[RatingRecord, float]]:
    """Standardize scores within groups: ``z = (x - mean) / std``.

    ``grouping="viewer"`` standardizes each viewer's ratings of one video;
    ``grouping="pvs"`` standardizes all ratings of one processed sample.
    Groups with zero spread get ``z = 0``.
    """
    if grouping == "viewer":
        key = lambda r: (r.video_id, r.subject_id)  # noqa: E731
    elif grouping == "pvs":
        key = lambda r: (r.video_id, r.pvs_id)  # noqa: E731
    else:
        raise DomainError(f"grouping must be 'viewer' or 'pvs', got {grouping!r}")
    groups: dict = defaultdict(list)
    for i, r in enumerate(ratings):
        groups[key(r)].append(i)
    z = [0.0] * len(ratings)
    for g, members in groups.items():
        x = np.array([ratings[i].score for i in members], dtype=float)
        sd = _std(x, ddof)
        if sd == 0.0:
            log.warning("z-score group %s has zero spread; z set to 0", g)
            continue
        mu = x.mean()
        for i, v in zip(members, x):
            z[i] = float((v - mu) / sd)
    return list(zip(ratings, z))


def aggregate_mos(ratings: Iterable[RatingRecord],
                  cells: Iterable[tuple] | None = None) -> list[MosPoint]:
    """Mean and sample standard deviation of the scores per (video, condition, tau).

    ``cells`` optionally lists the expected ``(video_id, kind, q_hat, s_hat, tau)``
    keys; any without ratings are logged as missing.
    """
    groups: dict = defaultdict(list)
    for r in ratings:
        groups[(r.video_id, r.kind, r.q_hat, r.s_hat, r.tau)].append(r.score)
    if cells is not None:
        for cell in cells:
            if tuple(cell) not in groups:
                log.warning("no ratings left for cell %s; MOS point missing", tuple(cell))
    out = []
    for key in sorted(groups):
        x = np.array(groups[key], dtype=float)
        out.append(MosPoint(*key, mos=float(x.mean()), stddev=_std(x, 1), n_subjects=len(x)))
    return out


def with_score(r: RatingRecord, score: float) -> RatingRecord:
    return replace(r, score=float(score))

