"""Figure rendering: per-user throughput CDFs, aggregate bars, time series."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import geo_mean_positive, read_slots, read_users

METRICS = ("geo_mean", "min_thr")


def _check_labels(inputs, labels):
    if labels is None:
        return [Path(p).parent.name or str(p) for p in inputs]
    if len(labels) != len(inputs):
        raise ValueError(f"{len(inputs)} inputs but {len(labels)} labels")
    return list(labels)


def plot_cdf(inputs, labels=None, out="cdf.png", xlabel="User throughput [Mb/s]"):
    """One empirical throughput CDF curve per users.csv input."""
    labels = _check_labels(inputs, labels)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for path, label in zip(inputs, labels):
        thr = np.sort(read_users(path)["mu_tilde_bps"]) / 1e6
        cdf = np.arange(1, thr.size + 1) / thr.size
        ax.step(np.concatenate([[0.0], thr]), np.concatenate([[0.0], cdf]),
                where="post", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Empirical CDF")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return Path(out)


def plot_bars(inputs, metric="geo_mean", labels=None, out="bars.png"):
    """Aggregate bars recomputed from the per-UE rows of each users.csv."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")
    labels = _check_labels(inputs, labels)
    values = []
    for path in inputs:
        thr = read_users(path)["mu_tilde_bps"]
        if thr.size == 0:
            raise ValueError(f"{path}: no per-UE rows to aggregate")
        if metric == "geo_mean":
            values.append(geo_mean_positive(thr) / 1e6)
        else:
            values.append(float(thr.min()) / 1e6)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(range(len(values)), values, tick_label=labels, color="#3a7ca5")
    names = {"geo_mean": "Geometric mean throughput [Mb/s]",
             "min_thr": "Minimum throughput [Mb/s]"}
    ax.set_ylabel(names[metric])
    ax.grid(True, axis="y", alpha=0.4)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return Path(out)


def plot_timeseries(inputs, labels=None, out="timeseries.png"):
    """Per-slot sum service rate and max virtual queue from slots.csv files."""
    labels = _check_labels(inputs, labels)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.5, 5.5), sharex=True)
    for path, label in zip(inputs, labels):
        table = read_slots(path)
        ax1.plot(table["slot"], table["sum_mu"], label=label, alpha=0.85)
        ax2.plot(table["slot"], table["max_queue"], label=label, alpha=0.85)
    ax1.set_ylabel("Sum service rate [bit/s/Hz]")
    ax2.set_ylabel("Max virtual queue")
    ax2.set_xlabel("Scheduling slot")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.4)
    ax1.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return Path(out)
