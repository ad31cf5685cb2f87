"""Sliding-window mutual-information statistics and outage-rate adaptation.

The allocated rate maximizes r * P_hat(r) over the window's empirical
complementary CDF; since the product rises linearly up to each step, the
maximizer lies on the sample support. P_hat uses a closed inequality
(fraction of samples >= r) so the chosen rate itself counts as decodable.
"""

from __future__ import annotations

from collections import deque
from pathlib import Path

import numpy as np


class RateWindow:
    """Ring buffer of recent mutual-information samples plus the derived
    outage-optimal rate r_star and expected service rate r_bar."""

    __slots__ = ("samples", "r_star", "r_bar")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.samples: deque[float] = deque(maxlen=capacity)
        self.r_star = 0.0
        self.r_bar = 0.0

    def __len__(self) -> int:
        return len(self.samples)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.samples, dtype=float)

    def record(self, value: float) -> None:
        if value < 0:
            raise ValueError("mutual information samples are nonnegative")
        self.samples.append(float(value))
        self.r_star, self.r_bar = optimal_outage_rate(self)


def record_sample(window: RateWindow, value: float) -> RateWindow:
    window.record(value)
    return window


def empirical_ccdf(window: RateWindow, r: float) -> float:
    """Fraction of window samples >= r."""
    if not window.samples:
        raise ValueError("empirical CCDF of an empty window")
    arr = window.as_array()
    return float(np.count_nonzero(arr >= r)) / arr.size


def optimal_outage_rate(window: RateWindow) -> tuple[float, float]:
    """Maximize r * P_hat(r) over the distinct sample values.

    Ties go to the smallest maximizing rate. Returns (r_star, r_bar) with
    r_bar = r_star * P_hat(r_star).
    """
    if not window.samples:
        raise ValueError("outage rate of an empty window")
    arr = np.sort(window.as_array())
    n = arr.size
    values = np.unique(arr)
    counts = n - np.searchsorted(arr, values, side="left")
    products = values * counts / n
    idx = int(np.argmax(products))  # first max = smallest candidate
    return float(values[idx]), float(products[idx])


def export_windows(windows, path: str | Path, ue_ids=None) -> Path:
    """Per-UE window dump: CSV with columns ue_id, sample_index, value.

    Accepts RateWindow objects or plain per-UE sample sequences.
    """
    path = Path(path)
    if ue_ids is None:
        ue_ids = range(len(windows))
    lines = ["ue_id,sample_index,value"]
    for k in ue_ids:
        win = windows[k]
        samples = win.samples if isinstance(win, RateWindow) else win
        for i, v in enumerate(samples):
            lines.append(f"{k},{i},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path
