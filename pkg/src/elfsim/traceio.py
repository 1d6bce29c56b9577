"""Trace records and deterministic CSV / JSON serialization.

Floats are written with 17 significant digits so round-tripping is exact and
outputs are byte-stable across runs and platforms.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

TRACE_COLUMNS = (
    "round",
    "kl_proxy",
    "w2_proxy",
    "fisher_proxy",
    "lyapunov_dual_mean",
    "lyapunov_primal_mean",
    "step_sq_mean",
    "uplink_floats_cum",
    "downlink_floats_cum",
    "theory_bound",
)

_INT_COLUMNS = ("round", "uplink_floats_cum", "downlink_floats_cum")


@dataclass
class TraceRecord:
    round: int
    kl_proxy: float
    w2_proxy: float
    fisher_proxy: float
    lyapunov_dual_mean: float
    lyapunov_primal_mean: float
    step_sq_mean: float
    uplink_floats_cum: int
    downlink_floats_cum: int
    theory_bound: float


def format_float(x: float) -> str:
    if x != x:
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def write_trace_csv(path: str, records: list[TraceRecord]):
    lines = [",".join(TRACE_COLUMNS)]
    for rec in records:
        cells = []
        for col in TRACE_COLUMNS:
            val = getattr(rec, col)
            cells.append(str(int(val)) if col in _INT_COLUMNS else format_float(val))
        lines.append(",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path: str) -> list[TraceRecord]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns: {header}")
        records = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            kwargs = {}
            for col, cell in zip(TRACE_COLUMNS, cells):
                kwargs[col] = int(cell) if col in _INT_COLUMNS else float(cell)
            records.append(TraceRecord(**kwargs))
    return records


def _jsonable(obj):
    """Replace NaN/inf floats by None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_summary_json(path: str, summary: dict):
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


SWEEP_COLUMNS = (
    "gamma",
    "plateau_kl",
    "final_kl",
    "final_w2",
    "rounds",
    "uplink_floats_cum",
    "downlink_floats_cum",
)

_SWEEP_INT = ("rounds", "uplink_floats_cum", "downlink_floats_cum")


def write_sweep_csv(path: str, rows: list[dict]):
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells = []
        for col in SWEEP_COLUMNS:
            val = row[col]
            cells.append(str(int(val)) if col in _SWEEP_INT else format_float(val))
        lines.append(",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sweep_csv(path: str) -> list[dict]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != SWEEP_COLUMNS:
            raise ValueError(f"unexpected sweep columns: {header}")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            row = {}
            for col, cell in zip(SWEEP_COLUMNS, cells):
                row[col] = int(cell) if col in _SWEEP_INT else float(cell)
            rows.append(row)
    return rows
