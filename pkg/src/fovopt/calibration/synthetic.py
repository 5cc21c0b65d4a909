"""Synthetic rating panels drawn from the perceptual model plus noise."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..model import DEFAULT_CONSTANTS, ModelConstants, qp_to_stepsize, quality
from .ratings import RatingRecord

STUDY_TAUS = (0.1, 0.3, 0.7, 1.5, 2.0, 5.0)
Q_TEST_QPS = (22, 27, 32, 37, 42)
S_TEST_LEVELS = (1.0, 1 / 4, 1 / 16)


def q_conditions(qps: Iterable[int] = Q_TEST_QPS, c: ModelConstants = DEFAULT_CONSTANTS):
    return [("q", c.q_min / qp_to_stepsize(qp), 1.0) for qp in qps]


def s_conditions(levels: Iterable[float] = S_TEST_LEVELS):
    return [("s", 1.0, float(s)) for s in levels]


def joint_conditions(qps: Iterable[int] = (27, 32, 37, 42),
                     levels: Iterable[float] = (1 / 4, 1 / 16),
                     c: ModelConstants = DEFAULT_CONSTANTS):
    return [("joint", c.q_min / qp_to_stepsize(qp), float(s)) for s in levels for qp in qps]


def pvs_name(kind: str, q_hat: float, s_hat: float, tau: float) -> str:
    return f"{kind}-q{q_hat:.6f}-s{s_hat:.6f}-t{tau:g}"


def synthetic_panel(videos: Sequence[str], n_subjects: int,
                    conditions: Sequence[tuple[str, float, float]],
                    taus: Sequence[float] = STUDY_TAUS, *, noise_sd: float = 0.25,
                    seed: int = 0, c: ModelConstants = DEFAULT_CONSTANTS,
                    subject_bias_sd: float = 0.0, integer_scores: bool = True
                    ) -> list[RatingRecord]:
    """Ratings ``clip(round(Q + noise), 1, 5)`` for every video, subject and cell.

    ``Q`` is the model quality in MOS units.  Each subject may also carry a
    constant offset drawn with ``subject_bias_sd``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for video in videos:
        bias = rng.normal(0.0, subject_bias_sd, n_subjects) if subject_bias_sd else \
            np.zeros(n_subjects)
        for j in range(n_subjects):
            for kind, qh, sh in conditions:
                for tau in taus:
                    x = float(quality(tau, qh, sh, c)) + bias[j] + rng.normal(0.0, noise_sd)
                    if integer_scores:
                        x = float(np.rint(x))
                    out.append(RatingRecord(
                        video_id=str(video),
                        pvs_id=pvs_name(kind, qh, sh, tau),
                        subject_id=f"S{j + 1:02d}",
                        kind=kind,
                        q_hat=qh,
                        s_hat=sh,
                        tau=float(tau),
                        score=float(np.clip(x, 1.0, 5.0)),
                    ))
    return out
