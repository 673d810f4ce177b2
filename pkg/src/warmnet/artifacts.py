"""Reading and writing run artifacts (CSV tables and JSON reports)."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .analysis import SnapshotSeries

SNAPSHOT_HEADER = ["t", "edge_id", "weight", "x"]


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_snapshots(path, series: SnapshotSeries) -> None:
    if series.weights is None:
        raise ValueError("snapshot CSV needs integer weights")
    rows = (
        (repr(float(t)), e, int(w), repr(float(x)))
        for t, ws, xs in zip(series.times, series.weights, series.x)
        for e, (w, x) in enumerate(zip(ws, xs))
    )
    _write_rows(path, SNAPSHOT_HEADER, rows)


def read_snapshots(path) -> SnapshotSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SNAPSHOT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SNAPSHOT_HEADER)}")
        by_time: dict[float, dict[int, int]] = {}
        for t, e, w, _ in reader:
            by_time.setdefault(float(t), {})[int(e)] = int(w)
    times = sorted(by_time)
    if not times:
        return SnapshotSeries.empty(0)
    n_edges = len(by_time[times[0]])
    weights = np.zeros((len(times), n_edges), dtype=np.int64)
    for i, t in enumerate(times):
        row = by_time[t]
        if sorted(row) != list(range(n_edges)):
            raise ValueError(f"{path}: snapshot at t={t} does not cover edges 0..{n_edges - 1}")
        weights[i] = [row[e] for e in range(n_edges)]
    return SnapshotSeries.from_weights(times, weights)


def write_mu(path, mu) -> None:
    _write_rows(path, ["edge_id", "mu"], ((e, repr(float(m))) for e, m in enumerate(mu)))


def read_mu(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["edge_id", "mu"]:
            raise ValueError(f"{path}: expected header edge_id,mu")
        pairs = sorted((int(e), float(m)) for e, m in reader)
    if [e for e, _ in pairs] != list(range(len(pairs))):
        raise ValueError(f"{path}: edge ids must be 0..n-1 without gaps")
    return np.array([m for _, m in pairs])


def write_deviation(path, times, dev) -> None:
    _write_rows(path, ["t", "sup_deviation"], ((repr(float(t)), repr(float(d))) for t, d in zip(times, dev)))


def write_limits(path, est) -> None:
    rows = ((e, repr(float(lo)), repr(float(hi))) for e, (lo, hi) in enumerate(zip(est.x_minus, est.x_plus)))
    _write_rows(path, ["edge_id", "x_minus_hat", "x_plus_hat"], rows)
