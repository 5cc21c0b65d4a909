"""Least-squares fits of the decay curve and of its parameter functions.

Every fit runs a coarse grid first and then polishes the best grid point
(bounded trust-region least squares for the decay curve, Nelder-Mead for the
parameter functions); the polished point is kept only if it improves the
squared error, so a fit is never worse than its own grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from ..errors import FitError
from ..model import butterworth, decay, exponential

log = logging.getLogger(__name__)

FAMILIES = ("butterworth", "exponential")

_NM_OPTS = {"xatol": 1e-12, "fatol": 1e-18, "maxiter": 20000, "maxfev": 40000}


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    rmse: float
    n_points: int
    degenerate: bool = False


@dataclass(frozen=True)
class ParamFit:
    k1: float
    k2: float
    k3: float
    rmse: float
    n_points: int
    family: str
    degenerate: bool = False

    @property
    def k(self) -> tuple[float, float, float]:
        return (self.k1, self.k2, self.k3)


def _as_points(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise FitError("x and y must have the same length")
    ok = np.isfinite(x) & np.isfinite(y)
    return x[ok], y[ok]


def decay_sse(a: float, b: float, tau: np.ndarray, y: np.ndarray) -> float:
    r = decay(tau, a, b) - y
    return float(r @ r)


def fit_decay(tau: Sequence[float], values: Sequence[float],
              b_bounds: tuple[float, float] = (-0.1, 50.0), n_grid: int = 200) -> FitResult:
    """Fit ``a * exp(-b * tau) + 1 - a`` to normalized qualities.

    ``a`` is restricted to [0, 1] and ``b`` to ``b_bounds``.  Needs at least
    three distinct ``tau`` values.  Flat data returns ``a = b = 0``.
    """
    t, y = _as_points(tau, values)
    if np.unique(t).size < 3:
        raise FitError("fit_decay needs at least 3 distinct tau values")
    n = t.size
    if np.ptp(y) == 0.0:
        log.warning("fit_decay: all values equal, returning a=0, b=0")
        r = y - 1.0
        return FitResult(0.0, 0.0, math.sqrt(float(r @ r) / n), n, degenerate=True)

    b_lo, b_hi = b_bounds
    ag = np.linspace(0.0, 1.0, n_grid)
    # most of the action is at small |b|; a uniform grid would step over it
    bg = np.unique(np.concatenate([np.linspace(b_lo, b_hi, n_grid),
                                   np.linspace(b_lo, min(b_hi, 1.0), n_grid)]))
    # (n_a, n_b, n) residual cube is small enough for 200 x 200 x (tens of points)
    shape = 1.0 - ag[:, None, None] * -np.expm1(-bg[None, :, None] * t[None, None, :])
    sse = np.sum((shape - y) ** 2, axis=2)
    i, j = np.unravel_index(int(np.argmin(sse)), sse.shape)
    a0, b0, f0 = float(ag[i]), float(bg[j]), float(sse[i, j])

    res = least_squares(lambda p: decay(t, p[0], p[1]) - y, x0=[a0, b0],
                        bounds=([0.0, b_lo], [1.0, b_hi]), method="trf",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    a, b = float(res.x[0]), float(res.x[1])
    f = decay_sse(a, b, t, y)
    if not f < f0:
        a, b, f = a0, b0, f0
    return FitResult(a, b, math.sqrt(f / n), n)


# ---------------------------------------------------------------------------
# parameter functions
#
# Both families are linear in some constants once the others are fixed, so the
# grid and the polish both search only the nonlinear ones and solve the rest
# by linear least squares.


def _butterworth_inner(x, y, log_k2, k3):
    g = 1.0 / (1.0 + math.exp(log_k2) * np.power(x, k3))
    k1 = float(g @ y) / float(g @ g)
    r = k1 * g - y
    return k1, float(r @ r)


def _exponential_inner(x, y, k2):
    A = np.column_stack([np.exp(-k2 * x), np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = A @ coef - y
    return float(coef[0]), float(coef[1]), float(r @ r)


def _fit_butterworth(x, y) -> ParamFit:
    n = x.size
    best = None
    for lk2 in np.linspace(math.log(1e-3), math.log(1e4), 141):
        for k3 in np.linspace(0.05, 8.0, 160):
            k1, f = _butterworth_inner(x, y, lk2, k3)
            if best is None or f < best[0]:
                best = (f, lk2, k3)
    f0, lk2, k3 = best
    res = minimize(lambda p: _butterworth_inner(x, y, p[0], p[1])[1], x0=[lk2, k3],
                   method="Nelder-Mead", options=_NM_OPTS)
    if res.fun < f0:
        lk2, k3 = float(res.x[0]), float(res.x[1])
    k1, f = _butterworth_inner(x, y, lk2, k3)
    return ParamFit(k1, math.exp(lk2), k3, math.sqrt(f / n), n, "butterworth")


def _fit_exponential(x, y) -> ParamFit:
    n = x.size
    grid = np.linspace(-30.0, 30.0, 1201)
    sse = [_exponential_inner(x, y, k2)[2] for k2 in grid]
    i = int(np.argmin(sse))
    k2, f0 = float(grid[i]), sse[i]
    res = minimize(lambda p: _exponential_inner(x, y, p[0])[2], x0=[k2],
                   method="Nelder-Mead", options=_NM_OPTS)
    if res.fun < f0:
        k2 = float(res.x[0])
    k1, k3, f = _exponential_inner(x, y, k2)
    return ParamFit(k1, k2, k3, math.sqrt(f / n), n, "exponential")


def fit_param_function(scales: Sequence[float], values: Sequence[float],
                       family: str) -> ParamFit:
    """Fit ``k1/(1 + k2*x**k3)`` (butterworth) or ``k1*exp(-k2*x) + k3`` (exponential)."""
    if family not in FAMILIES:
        raise FitError(f"unknown family {family!r}; choose from {FAMILIES}")
    x, y = _as_points(scales, values)
    if np.unique(x).size < 3:
        raise FitError(f"{family} fit needs at least 3 distinct scale values")
    if np.ptp(y) == 0.0:
        log.warning("%s fit on constant data: k2 -> 0, result flagged degenerate", family)
        n = x.size
        if family == "butterworth":
            return ParamFit(float(y[0]), 0.0, 1.0, 0.0, n, family, degenerate=True)
        return ParamFit(0.0, 0.0, float(y[0]), 0.0, n, family, degenerate=True)
    fit = _fit_butterworth(x, y) if family == "butterworth" else _fit_exponential(x, y)
    if abs(fit.k2) < 1e-6 or (family == "exponential" and abs(fit.k1) < 1e-9):
        log.warning("%s fit is nearly flat (k2=%g), flagged degenerate", family, fit.k2)
        fit = ParamFit(*fit.k, fit.rmse, fit.n_points, family, degenerate=True)
    return fit


def fit_param_functions(fits: Sequence[tuple[float, float, float]],
                        family: str) -> dict[str, ParamFit]:
    """Fit the ``a`` and ``b`` parameter functions from ``(scale, a, b)`` triples."""
    if len(fits) < 3:
        raise FitError("need at least 3 (scale, a, b) triples")
    x = [f[0] for f in fits]
    return {
        "a": fit_param_function(x, [f[1] for f in fits], family),
        "b": fit_param_function(x, [f[2] for f in fits], family),
    }


def predict(fit: ParamFit, x):
    fn = butterworth if fit.family == "butterworth" else exponential
    return fn(np.asarray(x, dtype=float), fit.k)
