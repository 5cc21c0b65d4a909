"""Closed-form perceptual model for quality refinement after a viewport switch.

The perceived quality of a reduced-quality layer that is refined to full
quality after ``tau`` seconds is modelled as a product of two exponential
decays, one driven by the quantization gap and one by the resolution gap::

    Q(tau, q_hat, s_hat) = Qmax * NQQ(tau, q_hat) * NQS(tau, s_hat)
    NQx(tau, x)          = a(x) * exp(-b(x) * tau) + 1 - a(x)

with Butterworth-shaped ``a(q_hat)``, ``b(q_hat)`` and exponential
``a(s_hat)``, ``b(s_hat)``.  All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import DomainError, InputError

ArrayLike = Union[float, np.ndarray]
Triple = Tuple[float, float, float]

QP_MIN, QP_MAX = 0, 51
# Lowest normalized stepsize used by the optimizers: q_min / 160.
Q_HAT_FLOOR = 0.05


@dataclass(frozen=True)
class ModelConstants:
    k_aq: Triple = (0.8, 39.55, 2.73)
    k_bq: Triple = (1.45, 47.14, 3.29)
    k_as: Triple = (0.8, 4.65, 0.0)
    k_bs: Triple = (4.53, 0.3, -3.37)
    q_max_mos: float = 5.0
    q_min: float = 8.0
    clamp_quality: bool = True

    def __post_init__(self):
        for name in ("k_aq", "k_bq", "k_as", "k_bs"):
            k = tuple(float(v) for v in getattr(self, name))
            if len(k) != 3:
                raise DomainError(f"{name} needs three constants, got {len(k)}")
            if not k[0] > 0:
                raise DomainError(f"{name}.k1 must be positive, got {k[0]}")
            object.__setattr__(self, name, k)
        for name in ("k_aq", "k_bq"):
            k = getattr(self, name)
            if not (k[1] > 0 and k[2] > 0):
                raise DomainError(f"{name}.k2 and {name}.k3 must be positive, got {k}")
        if not self.q_min > 0:
            raise DomainError(f"q_min must be positive, got {self.q_min}")
        if not self.q_max_mos > 0:
            raise DomainError(f"q_max_mos must be positive, got {self.q_max_mos}")

    def with_(self, **changes) -> "ModelConstants":
        d = asdict(self)
        d.update(changes)
        return ModelConstants(**d)

    def to_json_dict(self) -> dict:
        out = {}
        for key, name in _JSON_ROWS:
            k = getattr(self, name)
            out[key] = {"k1": k[0], "k2": k[1], "k3": k[2]}
        out["q_max_mos"] = self.q_max_mos
        out["q_min"] = self.q_min
        out["clamp_quality"] = self.clamp_quality
        return out

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ModelConstants":
        kwargs = {}
        for key, name in _JSON_ROWS:
            if key in doc:
                row = doc[key]
                try:
                    kwargs[name] = (row["k1"], row["k2"], row["k3"])
                except (KeyError, TypeError) as exc:
                    raise InputError(f"row {key!r} needs k1, k2, k3") from exc
        for key in ("q_max_mos", "q_min", "clamp_quality"):
            if key in doc:
                kwargs[key] = doc[key]
        return cls(**kwargs)


_JSON_ROWS = (("a_q", "k_aq"), ("b_q", "k_bq"), ("a_s", "k_as"), ("b_s", "k_bs"))

DEFAULT_CONSTANTS = ModelConstants()


def load_constants(path: str | Path | None = None) -> ModelConstants:
    """Read constants from a JSON file; ``None`` loads the bundled defaults."""
    if path is None:
        text = resources.files("fovopt").joinpath("constants/table1.json").read_text()
        src = "<bundled constants/table1.json>"
    else:
        src = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read constants: {exc.strerror}", path=src) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, path=src, line=exc.lineno) from exc
    try:
        return ModelConstants.from_json_dict(doc)
    except (DomainError, InputError, TypeError) as exc:
        raise InputError(str(exc), path=src) from exc


def save_constants(c: ModelConstants, path: str | Path) -> None:
    Path(path).write_text(json.dumps(c.to_json_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# QP <-> stepsize


def qp_to_stepsize(qp: int) -> float:
    """Quantization stepsize for an integer QP, ``2 ** ((qp - 4) / 6)``."""
    if isinstance(qp, bool) or int(qp) != qp:
        raise DomainError(f"QP must be an integer, got {qp!r}")
    qp = int(qp)
    if not QP_MIN <= qp <= QP_MAX:
        raise DomainError(f"QP must lie in [{QP_MIN}, {QP_MAX}], got {qp}")
    return 2.0 ** ((qp - 4) / 6.0)


def stepsize_to_qp(q: float) -> int:
    """Nearest integer QP for a stepsize."""
    if not q > 0:
        raise DomainError(f"stepsize must be positive, got {q}")
    qp = int(round(6.0 * math.log2(q) + 4.0))
    if not QP_MIN <= qp <= QP_MAX:
        raise DomainError(f"stepsize {q} maps to QP {qp}, outside [{QP_MIN}, {QP_MAX}]")
    return qp


def normalize_stepsize(q: ArrayLike, c: ModelConstants = DEFAULT_CONSTANTS) -> ArrayLike:
    return c.q_min / q


# ---------------------------------------------------------------------------
# parameter functions


def _check_scale(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be positive")
    return arr


def _check_tau(tau):
    arr = np.asarray(tau, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError("tau must be non-negative")
    return arr


def butterworth(x: ArrayLike, k: Triple) -> ArrayLike:
    return k[0] / (1.0 + k[1] * np.power(x, k[2]))


def exponential(x: ArrayLike, k: Triple) -> ArrayLike:
    return k[0] * np.exp(-k[1] * x) + k[2]


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def q_params(q_hat: ArrayLike, c: ModelConstants = DEFAULT_CONSTANTS):
    """``(a, b)`` of the quantization factor at normalized stepsize ``q_hat``."""
    q = _check_scale(q_hat, "q_hat")
    return _out(butterworth(q, c.k_aq)), _out(butterworth(q, c.k_bq))


def s_params(s_hat: ArrayLike, c: ModelConstants = DEFAULT_CONSTANTS):
    """``(a, b)`` of the resolution factor at normalized resolution ``s_hat``."""
    s = _check_scale(s_hat, "s_hat")
    return _out(exponential(s, c.k_as)), _out(exponential(s, c.k_bs))


def model_params(q_hat: ArrayLike, s_hat: ArrayLike, c: ModelConstants = DEFAULT_CONSTANTS):
    """Return ``(a_q, b_q, a_s, b_s)``."""
    a_q, b_q = q_params(q_hat, c)
    a_s, b_s = s_params(s_hat, c)
    return a_q, b_q, a_s, b_s


def decay(tau: ArrayLike, a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """``a * exp(-b * tau) + 1 - a``; equals 1 at ``tau = 0``."""
    # 1 - a*(1 - e^{-b tau}) is exactly 1.0 at tau == 0, unlike a + (1 - a)
    return 1.0 - a * -np.expm1(-b * tau)


def nqq(tau: ArrayLike, q_hat: ArrayLike, c: ModelConstants = DEFAULT_CONSTANTS) -> ArrayLike:
    """Normalized quality of the quantization gap after ``tau`` seconds."""
    t = _check_tau(tau)
    a, b = q_params(q_hat, c)
    v = decay(t, a, b)
    if c.clamp_quality:
        v = np.clip(v, 0.0, 1.0)
    return _out(v)


def nqs(tau: ArrayLike, s_hat: ArrayLike, c: ModelConstants = DEFAULT_CONSTANTS) -> ArrayLike:
    """Normalized quality of the resolution gap after ``tau`` seconds.

    With the default constants ``b(s_hat)`` turns negative above
    ``s_hat ~= 0.986``, so the raw value exceeds 1 for large ``tau``; it is
    clamped to [0, 1] unless ``c.clamp_quality`` is off.
    """
    t = _check_tau(tau)
    a, b = s_params(s_hat, c)
    v = decay(t, a, b)
    if c.clamp_quality:
        v = np.clip(v, 0.0, 1.0)
    return _out(v)


def _is_scalar(x) -> bool:
    return isinstance(x, (float, int)) and not isinstance(x, bool)


def _quality_norm_scalar(tau: float, q_hat: float, s_hat: float, c: ModelConstants) -> float:
    # same arithmetic as the array path, minus numpy's per-call overhead;
    # optimizers call this in tight scalar loops
    if not tau >= 0:
        raise DomainError("tau must be non-negative")
    if not (q_hat > 0 and s_hat > 0):
        raise DomainError("q_hat and s_hat must be positive")
    kq, kb, ks, kt = c.k_aq, c.k_bq, c.k_as, c.k_bs
    a_q = kq[0] / (1.0 + kq[1] * q_hat ** kq[2])
    b_q = kb[0] / (1.0 + kb[1] * q_hat ** kb[2])
    a_s = ks[0] * math.exp(-ks[1] * s_hat) + ks[2]
    b_s = kt[0] * math.exp(-kt[1] * s_hat) + kt[2]
    vq = 1.0 - a_q * -math.expm1(-b_q * tau)
    vs = 1.0 - a_s * -math.expm1(-b_s * tau)
    if c.clamp_quality:
        vq = min(max(vq, 0.0), 1.0)
        vs = min(max(vs, 0.0), 1.0)
    return vq * vs


def quality_norm(tau: ArrayLike, q_hat: ArrayLike, s_hat: ArrayLike,
                 c: ModelConstants = DEFAULT_CONSTANTS) -> ArrayLike:
    """Normalized quality ``Q / Qmax``."""
    if _is_scalar(tau) and _is_scalar(q_hat) and _is_scalar(s_hat):
        return _quality_norm_scalar(float(tau), float(q_hat), float(s_hat), c)
    return _out(np.multiply(nqq(tau, q_hat, c), nqs(tau, s_hat, c)))


def quality(tau: ArrayLike, q_hat: ArrayLike, s_hat: ArrayLike,
            c: ModelConstants = DEFAULT_CONSTANTS) -> ArrayLike:
    """Perceived quality in MOS units."""
    return _out(c.q_max_mos * np.asarray(quality_norm(tau, q_hat, s_hat, c)))
