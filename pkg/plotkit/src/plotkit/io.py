"""CSV readers for the simulator's report files.

plotkit consumes only the documented CSV contract (users.csv, slots.csv);
it never imports simulator internals.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

USERS_COLUMNS = ("ue_id", "x", "y", "mu_bar_bpcu", "mu_tilde_bps", "activity_frac")
SLOTS_COLUMNS = ("slot", "sum_mu", "geo_mean", "min_thr", "max_queue")


class SchemaError(ValueError):
    """A CSV input does not carry the expected header."""


def _read_table(path: str | Path, expected: tuple[str, ...]) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(expected)}")
        missing = [c for c in expected if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = [row for row in reader if row]
    columns = {}
    for name in expected:
        idx = header.index(name)
        columns[name] = np.array([float(row[idx]) for row in rows])
    return columns


def read_users(path: str | Path) -> dict[str, np.ndarray]:
    """Per-UE table: ue_id, x, y, mu_bar_bpcu, mu_tilde_bps, activity_frac."""
    return _read_table(path, USERS_COLUMNS)


def read_slots(path: str | Path) -> dict[str, np.ndarray]:
    """Per-slot table: slot, sum_mu, geo_mean, min_thr, max_queue."""
    return _read_table(path, SLOTS_COLUMNS)


def geo_mean_positive(values: np.ndarray) -> float:
    positive = values[values > 0]
    if positive.size == 0:
        return 0.0
    return float(np.exp(np.mean(np.log(positive))))
