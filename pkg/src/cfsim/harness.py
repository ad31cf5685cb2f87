"""End-to-end experiment runner: scenario build, start-up and scheduling
loops, throughput accounting, and report serialization."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .association import assign_pilots_fixed, form_clusters
from .config import ConfigError, SimConfig
from .geometry import build_network
from .scheduler import SchedulerState, SlotScheduler

TOPOLOGY_PHASE = 7


@dataclass
class ThroughputReport:
    """Per-UE throughput statistics and per-slot time series of one run.

    mu_bar is in bit/s/Hz (unconditional time average over scheduling
    slots); mu_tilde = mu_bar * F * W_rb in bit/s. The geometric mean runs
    over strictly positive throughputs with the zero count reported apart.
    """

    config: SimConfig
    ue_xy: np.ndarray
    mu_bar: np.ndarray
    mu_tilde: np.ndarray
    activity_frac: np.ndarray
    geo_mean: float
    n_zero: int
    min_thr: float
    sum_thr: float
    cdf_samples: np.ndarray
    ts_sum_mu: np.ndarray
    ts_geo_mean: np.ndarray
    ts_min_thr: np.ndarray
    ts_min_queue: np.ndarray
    ts_max_queue: np.ndarray
    ts_utility: np.ndarray
    final_queues: np.ndarray
    final_windows: list = field(repr=False, default_factory=list)
    excluded: tuple = ()
    n_scheduling_slots: int = 0
    suboptimal_slots: int = 0
    wall_time_s: float = 0.0


def _geo_mean_positive(x: np.ndarray) -> float:
    positive = x[x > 0]
    if positive.size == 0:
        return 0.0
    return float(np.exp(np.mean(np.log(positive))))


def _utility_proxy(mu_tilde: np.ndarray) -> float:
    positive = mu_tilde[mu_tilde > 0]
    if positive.size == 0:
        return float("nan")
    return float(np.mean(np.log(positive)))


def run_simulation(config: SimConfig) -> ThroughputReport:
    """Simulate one subchannel: start-up, scheduling loop, statistics."""
    config.validate()
    t_start = time.perf_counter()
    rng = np.random.default_rng([config.seed, TOPOLOGY_PHASE])
    geom, lss = build_network(config, rng)
    assoc = form_clusters(lss, config)
    if config.pilot_mode == "fixed":
        assoc = assign_pilots_fixed(assoc, lss, config)
    runner = SlotScheduler(config, lss, assoc)
    state = SchedulerState(config.K, config.N_window)
    n_slots = config.n_slots

    if n_slots > 0:
        for t in range(config.N_init):
            runner.startup_slot(state, t)
        _pad_cold_starts(state, runner.schedulable)

    k_eff = config.K
    bw = config.F * config.W_rb
    ts_sum_mu = np.zeros(n_slots)
    ts_geo = np.zeros(n_slots)
    ts_min_thr = np.zeros(n_slots)
    ts_min_q = np.zeros(n_slots)
    ts_max_q = np.zeros(n_slots)
    ts_util = np.zeros(n_slots)
    suboptimal = 0
    uses_dpp = config.scheduler_kind in ("pf", "hf")
    for t in range(n_slots):
        if uses_dpp:
            outcome = runner.dpp_slot(state, t)
        else:
            outcome = runner.baseline_slot(config.scheduler_kind, state, t)
        suboptimal += int(outcome.suboptimal)
        ts_sum_mu[t] = outcome.service.sum()
        mu_tilde_running = state.served_bits / (t + 1) * bw
        ts_geo[t] = _geo_mean_positive(mu_tilde_running)
        ts_min_thr[t] = float(mu_tilde_running.min())
        sched_q = state.queues[runner.schedulable]
        ts_min_q[t] = float(sched_q.min()) if sched_q.size else 0.0
        ts_max_q[t] = float(sched_q.max()) if sched_q.size else 0.0
        ts_util[t] = _utility_proxy(mu_tilde_running)

    if n_slots > 0:
        mu_bar = state.served_bits / n_slots
        activity = state.active_count / n_slots
    else:
        mu_bar = np.zeros(k_eff)
        activity = np.zeros(k_eff)
    mu_tilde = mu_bar * bw
    report = ThroughputReport(
        config=config,
        ue_xy=geom.ue_xy,
        mu_bar=mu_bar,
        mu_tilde=mu_tilde,
        activity_frac=activity,
        geo_mean=_geo_mean_positive(mu_tilde),
        n_zero=int(np.count_nonzero(mu_tilde <= 0)),
        min_thr=float(mu_tilde.min()) if k_eff else 0.0,
        sum_thr=float(mu_tilde.sum()),
        cdf_samples=np.sort(mu_tilde),
        ts_sum_mu=ts_sum_mu,
        ts_geo_mean=ts_geo,
        ts_min_thr=ts_min_thr,
        ts_min_queue=ts_min_q,
        ts_max_queue=ts_max_q,
        ts_utility=ts_util,
        final_queues=state.queues.copy(),
        final_windows=[w.as_array() for w in state.windows],
        excluded=tuple(sorted(assoc.excluded)),
        n_scheduling_slots=n_slots,
        suboptimal_slots=suboptimal,
    )
    report.wall_time_s = time.perf_counter() - t_start
    return report


def _pad_cold_starts(state: SchedulerState, schedulable: np.ndarray) -> None:
    """UEs never active during start-up get one pessimistic sample equal to
    the smallest mutual information observed network-wide."""
    observed = [s for win in state.windows for s in win.samples]
    floor = min(observed) if observed else 0.0
    empty = [int(k) for k in schedulable if len(state.windows[k]) == 0]
    if empty:
        state.record_mi(empty, [floor] * len(empty))


USERS_HEADER = "ue_id,x,y,mu_bar_bpcu,mu_tilde_bps,activity_frac"
SLOTS_HEADER = "slot,sum_mu,geo_mean,min_thr,max_queue"


def export_report(report: ThroughputReport, path_prefix: str | Path) -> list[Path]:
    """Write users.csv, slots.csv and meta.json under the given directory."""
    out = Path(path_prefix)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    users = out / "users.csv"
    lines = [USERS_HEADER]
    if report.n_scheduling_slots > 0:
        for k in range(report.mu_bar.size):
            x, y = report.ue_xy[k]
            lines.append(
                f"{k},{float(x)!r},{float(y)!r},{float(report.mu_bar[k])!r},"
                f"{float(report.mu_tilde[k])!r},{float(report.activity_frac[k])!r}"
            )
    _write_lines(users, lines)

    slots = out / "slots.csv"
    lines = [SLOTS_HEADER]
    for t in range(report.n_scheduling_slots):
        lines.append(
            f"{t},{float(report.ts_sum_mu[t])!r},{float(report.ts_geo_mean[t])!r},"
            f"{float(report.ts_min_thr[t])!r},{float(report.ts_max_queue[t])!r}"
        )
    _write_lines(slots, lines)

    meta = out / "meta.json"
    payload = {
        "config": report.config.to_mapping(),
        "version": __version__,
        "seed": report.config.seed,
        "n_scheduling_slots": report.n_scheduling_slots,
        "excluded_ues": list(report.excluded),
        "suboptimal_slots": report.suboptimal_slots,
        "geo_mean_bps": report.geo_mean,
        "min_thr_bps": report.min_thr,
        "sum_thr_bps": report.sum_thr,
        "n_zero_throughput": report.n_zero,
        "wall_time_s": report.wall_time_s,
    }
    with open(meta, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [users, slots, meta]


def _write_lines(path: Path, lines: list[str]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def load_meta_config(path: str | Path) -> SimConfig:
    """Rebuild the SimConfig echoed in a meta.json file."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if "config" not in payload:
        raise ConfigError(f"{path} carries no config echo")
    return SimConfig.from_mapping(payload["config"])
