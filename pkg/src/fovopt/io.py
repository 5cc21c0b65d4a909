"""CSV/JSON artifacts: sweeps, bandwidth traces, FoV events and session reports.

Every CSV written here starts with two comment lines::

    # fovopt <version> config_sha256=<hex>
    # config=<canonical JSON>

so that a file can be traced back to the exact run that produced it.  Floats
are written with ``repr`` and therefore read back bit-for-bit.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from ._csv import parse_float, read_table
from .errors import DomainError, InputError
from .optimizer import OptimizationResult, SweepCurve
from .simulator import BandwidthTrace, FovEvent, SessionReport

SWEEP_FIELDS = ("B", "qp", "q", "q_hat", "s_hat", "tau", "rl_rate", "total_rate", "q_norm", "feasible")
REPORT_FIELDS = ("time", "B", "r_fov", "qp", "q", "s_hat", "tau", "q_norm", "feasible")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def header_lines(config: dict) -> list[str]:
    return [f"# fovopt {__version__} config_sha256={config_hash(config)}",
            f"# config={canonical_json(config)}"]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(dest, config: dict | None, fields: Sequence[str], rows: Iterable[dict]) -> None:
    """Write to a path, or to an open text stream such as ``sys.stdout``."""
    if hasattr(dest, "write"):
        _write_rows(dest, config, fields, rows)
        return
    with open(dest, "w", newline="") as fh:
        _write_rows(fh, config, fields, rows)


def _write_rows(fh, config, fields, rows) -> None:
    if config is not None:
        for line in header_lines(config):
            fh.write(line + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row[f]) for f in fields])


def read_config(comments: Sequence[str]) -> dict:
    for c in comments:
        if c.startswith("config="):
            return json.loads(c[len("config="):])
    return {}


# ---------------------------------------------------------------------------
# sweeps


def sweep_config(curve: SweepCurve, extra: dict | None = None) -> dict:
    cfg = {"kind": "sweep", "profile": curve.profile, "policy": curve.policy,
           "T": curve.init_duration, "meta": curve.meta}
    if extra:
        cfg.update(extra)
    return cfg


def write_sweep_csv(curve: SweepCurve, path: str | Path, extra: dict | None = None) -> None:
    _write_csv(path, sweep_config(curve, extra), SWEEP_FIELDS, (r.as_row() for r in curve.points))


def read_sweep_csv(path: str | Path) -> SweepCurve:
    src = str(path)
    comments, rows = read_table(path, SWEEP_FIELDS, "sweep")
    try:
        cfg = read_config(comments)
    except json.JSONDecodeError as exc:
        raise InputError(f"bad config comment: {exc.msg}", path=src) from exc
    points = []
    for lineno, row in rows:
        f = {k: parse_float(row[k], k, src, lineno) for k in SWEEP_FIELDS if k not in ("qp", "feasible")}
        if row["feasible"] not in ("0", "1"):
            raise InputError(f"feasible must be 0 or 1, got {row['feasible']!r}", path=src, line=lineno)
        qp = None
        if row["qp"]:
            try:
                qp = int(row["qp"])
            except ValueError:
                raise InputError(f"qp: not an integer: {row['qp']!r}", path=src, line=lineno) from None
        points.append(OptimizationResult(
            bandwidth=f["B"], q_opt=f["q"], q_hat=f["q_hat"], s_hat_opt=f["s_hat"],
            tau=f["tau"], rl_rate=f["rl_rate"], total_rate=f["total_rate"], q_norm=f["q_norm"],
            feasible=row["feasible"] == "1", qp_opt=qp))
    try:
        return SweepCurve(points, profile=cfg.get("profile", ""), policy=cfg.get("policy", ""),
                          init_duration=float(cfg.get("T", math.nan)), meta=cfg.get("meta", {}))
    except DomainError as exc:
        raise InputError(str(exc), path=src) from exc


# ---------------------------------------------------------------------------
# traces and events


def read_trace_csv(path: str | Path) -> BandwidthTrace:
    src = str(path)
    _, rows = read_table(path, ("time", "bandwidth"), "trace")
    t, b = [], []
    for lineno, row in rows:
        t.append(parse_float(row["time"], "time", src, lineno))
        b.append(parse_float(row["bandwidth"], "bandwidth", src, lineno))
        if len(t) > 1 and t[-1] <= t[-2]:
            raise InputError("trace times must be strictly increasing", path=src, line=lineno)
        if not b[-1] > 0:
            raise InputError("bandwidth must be positive", path=src, line=lineno)
    return BandwidthTrace(tuple(t), tuple(b))


def write_trace_csv(trace: BandwidthTrace, path: str | Path) -> None:
    _write_csv(path, None, ("time", "bandwidth"),
               ({"time": t, "bandwidth": b} for t, b in zip(trace.times, trace.bandwidths)))


def read_events_csv(path: str | Path) -> list[FovEvent]:
    """Events with columns ``time,tile_rates`` (rates separated by ``;``) and optional ``dt``."""
    src = str(path)
    _, rows = read_table(path, ("time", "tile_rates"), "events")
    out = []
    for lineno, row in rows:
        t = parse_float(row["time"], "time", src, lineno)
        rates = [parse_float(x, "tile_rates", src, lineno)
                 for x in row["tile_rates"].split(";") if x.strip()]
        dt = parse_float(row["dt"], "dt", src, lineno) if row.get("dt") else None
        try:
            out.append(FovEvent(t, tuple(rates), dt))
        except DomainError as exc:
            raise InputError(str(exc), path=src, line=lineno) from exc
    return out


def write_events_csv(events: Iterable[FovEvent], path: str | Path) -> None:
    _write_csv(path, None, ("time", "tile_rates", "dt"), (
        {"time": e.time, "tile_rates": ";".join(repr(r) for r in e.tile_rates),
         "dt": "" if e.dt is None else e.dt} for e in events))


# ---------------------------------------------------------------------------
# session reports


def write_report(report: SessionReport, csv_path: str | Path, json_path: str | Path | None = None,
                 extra: dict | None = None) -> None:
    cfg = {"kind": "simulate", "profile": report.profile, "policy": report.policy,
           "T": report.init_duration, "meta": report.meta}
    if extra:
        cfg.update(extra)
    _write_csv(csv_path, cfg, REPORT_FIELDS, report.rows)
    if json_path is not None:
        doc = {"version": __version__, "config_sha256": config_hash(cfg), **report.summary()}
        Path(json_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
