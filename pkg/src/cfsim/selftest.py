"""Oracle and invariant self-checks, shared by the CLI `selftest`
subcommand and the acceptance test suite.

The oracles here are independent of the implementation paths they verify:
subset enumeration for the weighted selection, a dense grid for the outage
rate, and a direct three-condition pair scan for the conflict graph.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .association import Association, build_conflict_graph
from .channel import estimate_channels, sample_channels, subspace_project
from .config import SimConfig
from .geometry import LargeScaleState, build_network
from .association import form_clusters, assign_pilots_fixed
from .phy import compute_combiners
from .ratectl import RateWindow
from .scheduler import solve_selection


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def brute_force_selection(weights, edges, cap, forced_zero=()):
    """Enumerate all feasible subsets; max value, then lexicographically
    smallest index tuple. Zero-weight vertices are never selected."""
    w = np.asarray(weights, dtype=float)
    forced = {int(k) for k in forced_zero}
    ids = [k for k in range(w.size) if w[k] > 0 and k not in forced]
    edge_set = {tuple(sorted((int(a), int(b)))) for a, b in edges}
    best_val, best_set = 0.0, ()
    for r in range(0, min(cap, len(ids)) + 1):
        for comb in itertools.combinations(ids, r):
            if any(
                (a, b) in edge_set for a, b in itertools.combinations(comb, 2)
            ):
                continue
            val = float(sum(w[c] for c in comb))
            if val > best_val or (val == best_val and comb < best_set):
                best_val, best_set = val, comb
    return best_set, best_val


def grid_rate_oracle(samples, n_grid: int = 20001):
    """Maximize r * P_hat(r) over a dense rate grid; returns (max product,
    grid step)."""
    arr = np.sort(np.asarray(samples, dtype=float))
    hi = float(arr.max())
    if hi == 0.0:
        return 0.0, 0.0
    grid = np.linspace(0.0, hi, n_grid)
    ccdf = (arr.size - np.searchsorted(arr, grid, side="left")) / arr.size
    products = grid * ccdf
    return float(products.max()), float(grid[1] - grid[0])


def brute_force_conflicts(clusters, pilots, supports, eta_f):
    """Direct pair scan of the three conflict conditions."""
    n = len(clusters)
    edges = set()
    for a in range(n):
        for b in range(a + 1, n):
            shared = set(clusters[a]) & set(clusters[b])
            if not shared or pilots[a] != pilots[b]:
                continue
            for ell in shared:
                inter = set(supports[ell][a]) & set(supports[ell][b])
                if math.sqrt(len(inter)) > eta_f:
                    edges.add((a, b))
                    break
    return frozenset(edges)


# ---------------------------------------------------------------------------
# Random instance generators
# ---------------------------------------------------------------------------

def random_selection_instance(rng: np.random.Generator):
    n = int(rng.integers(1, 17))
    if rng.random() < 0.3:
        weights = rng.integers(0, 6, size=n).astype(float)  # ties likely
    else:
        weights = rng.random(n) * np.where(rng.random(n) < 0.15, 0.0, 1.0)
    p_edge = rng.random() * 0.5
    edges = [
        (a, b)
        for a in range(n)
        for b in range(a + 1, n)
        if rng.random() < p_edge
    ]
    cap = int(rng.integers(0, n + 2))
    forced = [k for k in range(n) if rng.random() < 0.1]
    return weights, edges, cap, forced


def random_conflict_instance(rng: np.random.Generator):
    n = int(rng.integers(2, 31))
    n_ru = int(rng.integers(1, 7))
    m_grid = int(rng.integers(2, 9))
    tau_p = int(rng.integers(1, 5))
    clusters = []
    for _ in range(n):
        size = int(rng.integers(0, min(4, n_ru) + 1))
        clusters.append(tuple(sorted(rng.choice(n_ru, size=size, replace=False))))
    pilots = rng.integers(0, tau_p, size=n)
    supports = []
    for _ in range(n_ru):
        row = []
        for _ in range(n):
            size = int(rng.integers(1, m_grid + 1))
            row.append(tuple(sorted(rng.choice(m_grid, size=size, replace=False))))
        supports.append(row)
    eta_f = float(rng.choice([0.0, 0.0, 0.9, 1.2]))
    return clusters, pilots, supports, eta_f, n_ru, m_grid


def synthetic_state(clusters, pilots, supports, n_ru, n_ue, m_grid):
    """Wrap raw instance pieces into Association + LargeScaleState."""
    served = [[] for _ in range(n_ru)]
    for k, cluster in enumerate(clusters):
        for ell in cluster:
            served[ell].append(k)
    assoc = Association(
        clusters=list(clusters),
        served=[tuple(s) for s in served],
        pilots=np.asarray(pilots, dtype=int),
        excluded=frozenset(k for k, c in enumerate(clusters) if not c),
    )
    masks = [
        [sum(1 << s for s in supports[ell][k]) for k in range(n_ue)]
        for ell in range(n_ru)
    ]
    lss = LargeScaleState(
        beta=np.ones((n_ru, n_ue)),
        los=np.zeros((n_ru, n_ue), dtype=bool),
        supports=[list(row) for row in supports],
        support_masks=masks,
        snr=1.0,
        M=m_grid,
    )
    return assoc, lss


# ---------------------------------------------------------------------------
# Checks (each returns (ok, detail))
# ---------------------------------------------------------------------------

def check_selection_oracle(n_instances: int = 200, seed: int = 2024):
    rng = np.random.default_rng(seed)
    for i in range(n_instances):
        weights, edges, cap, forced = random_selection_instance(rng)
        result = solve_selection(weights, edges, cap, forced_zero=forced)
        expect_set, expect_val = brute_force_selection(weights, edges, cap, forced)
        if not result.optimal:
            return False, f"instance {i}: solver hit its node budget"
        if result.selected != expect_set:
            return False, (
                f"instance {i}: solver {result.selected} != oracle {expect_set}"
            )
        if abs(result.value - expect_val) > 1e-9 * (1 + abs(expect_val)):
            return False, f"instance {i}: value {result.value} != {expect_val}"
    return True, f"{n_instances} instances matched exhaustive enumeration"


def check_rate_oracle(n_instances: int = 200, seed: int = 515):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_instances):
        size = int(rng.integers(1, 51))
        scale = float(rng.choice([0.1, 1.0, 10.0]))
        samples = rng.random(size) * scale
        if rng.random() < 0.2:
            samples = np.round(samples, 1)  # duplicated values
        win = RateWindow(64)
        for s in samples:
            win.record(float(s))
        tail = np.asarray(win.samples)
        grid_max, step = grid_rate_oracle(tail)
        if win.r_bar < grid_max - 1e-12:
            return False, f"instance {i}: r*P(r*)={win.r_bar} below grid max {grid_max}"
        gap = win.r_bar - grid_max
        if gap > step + 1e-12:
            return False, f"instance {i}: gap {gap} exceeds grid step {step}"
        worst = max(worst, gap)
    return True, f"{n_instances} windows matched the grid oracle (worst gap {worst:.2e})"


def check_conflict_oracle(n_instances: int = 100, seed: int = 77):
    rng = np.random.default_rng(seed)
    for i in range(n_instances):
        clusters, pilots, supports, eta_f, n_ru, m_grid = random_conflict_instance(rng)
        assoc, lss = synthetic_state(clusters, pilots, supports, n_ru, len(clusters), m_grid)
        got = build_conflict_graph(assoc, lss, eta_f).edges
        expect = brute_force_conflicts(clusters, pilots, supports, eta_f)
        if got != expect:
            return False, f"instance {i}: graph mismatch ({len(got)} vs {len(expect)} edges)"
    return True, f"{n_instances} conflict graphs matched the pairwise scan"


def _small_network(seed: int = 5, **overrides) -> tuple[SimConfig, LargeScaleState]:
    params = dict(
        L=4, M=8, K_tot_f1=12, K_act=6, K_tilde=8, tau_p=4, T=40, F=1,
        N_init=10, N_window=20, n_slots=10, seed=seed, delta=math.pi / 3,
        ru_grid=(2, 2), area_side=120.0,
    )
    params.update(overrides)
    cfg = SimConfig(**params)
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, 7])
    _, lss = build_network(cfg, rng)
    return cfg, lss


def check_projection_idempotence(seed: int = 11):
    cfg, lss = _small_network(seed)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        ell = int(rng.integers(0, cfg.L))
        k = int(rng.integers(0, cfg.K))
        x = rng.standard_normal(cfg.M) + 1j * rng.standard_normal(cfg.M)
        once = subspace_project(lss, ell, k, x)
        twice = subspace_project(lss, ell, k, once)
        worst = max(worst, float(np.linalg.norm(twice - once) / np.linalg.norm(x)))
    ok = worst <= 1e-10
    return ok, f"worst ||P^2 x - P x||/||x|| = {worst:.2e} (tol 1e-10)"


def check_channel_moments(n_draws: int = 10_000, seed: int = 21):
    cfg, lss = _small_network(seed, delta=2 * math.pi)  # full angular support
    rng = np.random.default_rng(seed)
    block = sample_channels(lss, n_draws, rng, ues=np.arange(3))
    worst = 0.0
    for k in range(3):
        for ell in range(cfg.L):
            energy = np.mean(np.sum(np.abs(block.h[:, ell, k, :]) ** 2, axis=-1))
            target = lss.beta[ell, k] * cfg.M
            worst = max(worst, abs(energy - target) / target)
    ok = worst <= 0.03
    return ok, f"worst relative error of E||h||^2 vs beta*M = {worst:.3f} (tol 0.03)"


def check_estimation_noise(n_draws: int = 10_000, seed: int = 33):
    cfg, lss = _small_network(seed)
    assoc = assign_pilots_fixed(form_clusters(lss, cfg), lss, cfg)
    k = int(np.argmax([len(c) for c in assoc.clusters]))
    ell = assoc.clusters[k][0]
    rng = np.random.default_rng(seed)
    truth = sample_channels(lss, n_draws, rng, ues=np.array([k]))
    est = estimate_channels(
        truth, assoc, lss, [k], lss.snr, cfg.tau_p, rng, pilots=assoc.pilots
    )
    err = np.mean(np.sum(np.abs(est.h_hat[:, ell, 0, :] - truth.h[:, ell, 0, :]) ** 2, axis=-1))
    target = len(lss.supports[ell][k]) / (cfg.tau_p * lss.snr)
    rel = abs(err - target) / target
    ok = rel <= 0.05
    return ok, f"E||h_hat - h||^2 off by {rel:.3f} relative (tol 0.05)"


def check_combiner_norms(seed: int = 44):
    cfg, lss = _small_network(seed, F=3)
    assoc = assign_pilots_fixed(form_clusters(lss, cfg), lss, cfg)
    active = np.array(sorted(set(range(cfg.K)) - set(assoc.excluded))[: cfg.K_act])
    rng = np.random.default_rng(seed)
    truth = sample_channels(lss, cfg.F, rng, ues=active)
    est = estimate_channels(truth, assoc, lss, active, lss.snr, cfg.tau_p, rng,
                            pilots=assoc.pilots)
    comb = compute_combiners(est, assoc, active, lss.snr)
    norms = np.sqrt(np.einsum("flkm,flkm->fk", comb.v, comb.v.conj()).real)
    worst = float(np.max(np.abs(norms - 1.0)))
    ok = worst <= 1e-9
    return ok, f"worst | ||v||-1 | = {worst:.2e} (tol 1e-9)"


ALL_CHECKS = (
    ("selection solver vs exhaustive enumeration", check_selection_oracle),
    ("outage rate vs dense grid", check_rate_oracle),
    ("conflict graph vs pairwise condition scan", check_conflict_oracle),
    ("subspace projection idempotence", check_projection_idempotence),
    ("channel second moments", check_channel_moments),
    ("estimation noise power", check_estimation_noise),
    ("combiner unit norms", check_combiner_norms),
)


def run_selftest(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in ALL_CHECKS:
        ok, detail = fn()
        all_ok &= ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
