"""Run reports: the per-scenario record consumed by aggregation and the CLI.

Serialized reports are JSON with all numbers rounded to 6 significant digits
for diff-friendliness.  Measured compute times are excluded by default so
that reports are byte-identical across repeated runs with the same seed;
`raw=True` writes full-precision values including the timing samples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class InterceptionEvent:
    """One pass of the target through the net disc."""

    time: float
    accuracy: float          # horizontal distance from the disc center (m)
    crossing_point: tuple    # relative position at the crossing (m)


@dataclass(frozen=True)
class EstErrorSample:
    """Estimation error against ground truth at one filter epoch."""

    time: float
    p_err: tuple
    v_err: tuple


@dataclass
class RunReport:
    """Everything recorded from one closed-loop scenario run."""

    meta: dict                      # method, seed, trajectory id, start id, ...
    config: dict                    # full config echo (includes net offset)
    events: list[InterceptionEvent] = field(default_factory=list)
    est_samples: list[EstErrorSample] = field(default_factory=list)
    compute_times: list[float] = field(default_factory=list)

    def first_event_time(self) -> float | None:
        return self.events[0].time if self.events else None


def _jsonable(obj, sig: int | None):
    if isinstance(obj, float):
        if sig is None or not np.isfinite(obj):
            return obj
        return float(f"{obj:.{sig}g}")
    if isinstance(obj, (np.floating,)):
        return _jsonable(float(obj), sig)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(x, sig) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v, sig) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x, sig) for x in obj]
    return obj


def report_to_dict(report: RunReport, raw: bool = False) -> dict:
    sig = None if raw else 6
    out = {
        "meta": _jsonable(report.meta, sig),
        "config": _jsonable(report.config, sig),
        "events": [
            {
                "time": _jsonable(e.time, sig),
                "accuracy": _jsonable(e.accuracy, sig),
                "crossing_point": _jsonable(list(e.crossing_point), sig),
            }
            for e in report.events
        ],
        "est_samples": [
            {
                "time": _jsonable(s.time, sig),
                "p_err": _jsonable(list(s.p_err), sig),
                "v_err": _jsonable(list(s.v_err), sig),
            }
            for s in report.est_samples
        ],
    }
    if raw:
        out["compute_times"] = _jsonable(report.compute_times, None)
    return out


def write_report(report: RunReport, path, raw: bool = False) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report, raw), sort_keys=True, indent=1) + "\n")


def read_report(path) -> RunReport:
    data = json.loads(Path(path).read_text())
    return RunReport(
        meta=data["meta"],
        config=data["config"],
        events=[
            InterceptionEvent(e["time"], e["accuracy"], tuple(e["crossing_point"]))
            for e in data["events"]
        ],
        est_samples=[
            EstErrorSample(s["time"], tuple(s["p_err"]), tuple(s["v_err"]))
            for s in data["est_samples"]
        ],
        compute_times=list(data.get("compute_times", [])),
    )
