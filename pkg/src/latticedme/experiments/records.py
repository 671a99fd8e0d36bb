"""Result record emission and ingestion.

One row per (seed, iteration); fixed column order per experiment.
Floats are written with 17 significant digits so emit/parse round-trips
exactly, and output for a fixed seed is byte-identical across runs.
"""

from __future__ import annotations

import csv
import io
import json
import os

# Column orders are frozen; tests pin them.
DSGD_COLUMNS = (
    "experiment", "dataset", "seed", "iteration", "quantizer", "y_rule",
    "n", "d", "q", "loss", "output_variance", "input_variance", "bits",
    "y_estimate", "norm_diff_l2", "norm_diff_linf", "norm_g0_l2",
    "coord_range_g0", "decode_failures", "diverged",
)
LOCAL_SGD_COLUMNS = (
    "experiment", "dataset", "seed", "round", "quantizer", "n", "d", "q",
    "loss", "quant_error", "bits", "y_estimate", "decode_failures", "diverged",
)
POWER_ITER_COLUMNS = (
    "experiment", "seed", "phase", "iteration", "quantizer", "n", "d", "q",
    "alignment", "quant_error", "u_diff_linf", "bits", "y_estimate",
    "decode_failures",
)
SUBLINEAR_SIM_COLUMNS = (
    "experiment", "seed", "d", "q", "y", "bits_per_coordinate", "side",
    "variance", "trials", "successes", "mean_sq_error",
)
CODEC_BENCH_COLUMNS = (
    "backend", "op", "trials", "d", "q", "seconds", "checksum", "agrees",
)
PROTOCOL_BENCH_COLUMNS = (
    "protocol", "n", "d", "q", "m", "trial", "seed", "success", "mse",
    "bits_total", "bits_max_machine", "far_events",
)

_INT_FIELDS = frozenset({
    "seed", "iteration", "round", "n", "d", "q", "bits",
    "decode_failures", "diverged", "trials", "successes",
    "m", "trial", "success", "bits_total", "bits_max_machine",
    "far_events", "agrees",
})


def format_value(key: str, value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def rows_to_csv_text(fieldnames, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([format_value(k, row[k]) for k in fieldnames])
    return buf.getvalue()


def parse_csv_text(text: str):
    """Inverse of rows_to_csv_text: (fieldnames, rows with typed values)."""
    reader = csv.reader(io.StringIO(text))
    try:
        fieldnames = tuple(next(reader))
    except StopIteration:
        raise ValueError("CSV input has no header row") from None
    rows = []
    for raw in reader:
        row = {}
        for key, val in zip(fieldnames, raw):
            if key in _INT_FIELDS:
                row[key] = int(val)
            else:
                try:
                    row[key] = float(val)
                except ValueError:
                    row[key] = val
        rows.append(row)
    return fieldnames, rows


def emit(rows, path: str, fieldnames, fmt: str = "csv") -> str:
    """Write rows to path; returns the path actually written."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    try:
        if fmt == "csv":
            text = rows_to_csv_text(fieldnames, rows)
        else:
            payload = [{k: row[k] for k in fieldnames} for row in rows]
            text = json.dumps(payload, indent=1) + "\n"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_rows(path: str):
    """Read an emitted file back; format inferred from the extension."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc}") from exc
    if path.endswith(".json"):
        rows = json.loads(text)
        fieldnames = tuple(rows[0].keys()) if rows else ()
        return fieldnames, rows
    return parse_csv_text(text)


def mean_over_seeds(rows, group_keys, value_keys):
    """Aggregate rows by group_keys, averaging value_keys across seeds."""
    groups: dict = {}
    order = []
    for row in rows:
        key = tuple(row[k] for k in group_keys)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for key in order:
        bucket = groups[key]
        agg = dict(zip(group_keys, key))
        agg["seed_count"] = len(bucket)
        for vk in value_keys:
            agg[vk] = sum(r[vk] for r in bucket) / len(bucket)
        out.append(agg)
    return out
