"""Drift-plus-penalty fairness scheduling, the conflict-constrained
weighted-selection solver, and the baseline schedulers.

The per-slot active-set problem maximizes the weighted sum over independent
sets of the conflict graph with |A| <= K_act. It is solved exactly by
decomposing the graph into conflict components (per-size value profiles via
depth-first enumeration) combined through a budget DP, followed by a
directed search that returns the lexicographically smallest optimal index
set. Zero-weight UEs are never selected (they cannot change the objective).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .association import Association, ConflictGraph, build_conflict_graph, reassign_pilots
from .channel import estimate_channels, sample_channels
from .config import SimConfig
from .geometry import LargeScaleState
from .phy import compute_combiners, dl_mutual_information, ul_mutual_information
from .ratectl import RateWindow

DEFAULT_NODE_BUDGET = 1_000_000
_REASSIGN_RETRIES = 20


# ---------------------------------------------------------------------------
# Virtual arrivals
# ---------------------------------------------------------------------------

def virtual_arrivals_pf(queues, V: float, A_max: float) -> np.ndarray:
    """Proportional-fairness arrivals a_k = min(V/Q_k, A_max)."""
    q = np.asarray(queues, dtype=float)
    a = np.full(q.shape, A_max)
    positive = q > 0
    a[positive] = np.minimum(V / q[positive], A_max)
    return a


def virtual_arrivals_hf(queues, V: float, A_max: float) -> np.ndarray:
    """Hard-fairness arrivals: all A_max while sum(Q) < V, else all zero."""
    q = np.asarray(queues, dtype=float)
    return np.full(q.shape, A_max if q.sum() < V else 0.0)


# ---------------------------------------------------------------------------
# Weighted selection under the conflict graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    value: float
    optimal: bool


class _Budget:
    __slots__ = ("left",)

    def __init__(self, nodes: int):
        self.left = int(nodes)

    def spend(self) -> bool:
        """Consume one node; True once the budget is exhausted."""
        self.left -= 1
        return self.left < 0


def _components(vertices, adj) -> list[list[int]]:
    seen: set[int] = set()
    comps = []
    for start in vertices:
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        comps.append(sorted(comp))
    return comps


def _component_profile(comp, adj, w, max_size, budget: _Budget):
    """Best value of an independent set of each exact size within one
    conflict component. Enumerates via DFS; an edge-free remainder is
    folded in through sorted prefix sums."""
    best = [-np.inf] * (max_size + 1)
    best[0] = 0.0
    ok = True

    def rec(avail: frozenset, size: int, value: float):
        nonlocal ok
        if budget.spend():
            ok = False
            return
        if value > best[size]:
            best[size] = value
        if not avail or size == max_size:
            return
        if all(adj[v].isdisjoint(avail) for v in avail):
            ws = sorted((w[v] for v in avail), reverse=True)
            acc = value
            for j, wv in enumerate(ws[: max_size - size], start=1):
                acc += wv
                if acc > best[size + j]:
                    best[size + j] = acc
            return
        v = min(avail)
        rec(avail - {v} - adj[v], size + 1, value + w[v])
        if not ok:
            return
        rec(avail - {v}, size, value)

    rec(frozenset(comp), 0, 0.0)
    return best, ok


def _lex_dfs(vertices, adj, w, cap, target, tol, budget: _Budget):
    """First independent set (ascending-index, include-first order) whose
    value reaches the target; for positive weights this is the
    lexicographically smallest optimum."""
    n = len(vertices)
    found: list[int] | None = None

    def rec(i: int, avail: frozenset, chosen: list[int], value: float, r: int):
        nonlocal found
        if found is not None:
            return
        if value >= target - tol:
            found = sorted(chosen)
            return
        if budget.spend():
            return
        if r == 0 or not avail:
            return
        avail_w = sorted((w[v] for v in avail), reverse=True)[:r]
        if value + sum(avail_w) < target - tol:
            return
        if all(adj[v].isdisjoint(avail) for v in avail):
            take = sorted(avail, key=lambda u: (-w[u], u))[:r]
            if value + sum(w[u] for u in take) >= target - tol:
                found = sorted(chosen + take)
            return
        while i < n and vertices[i] not in avail:
            i += 1
        if i >= n:
            return
        v = vertices[i]
        rec(i + 1, avail - {v} - adj[v], chosen + [v], value + w[v], r - 1)
        if found is None:
            rec(i + 1, avail - {v}, chosen, value, r)

    rec(0, frozenset(vertices), [], 0.0, cap)
    return found


def _greedy_selection(eligible, adj, w, cap):
    chosen: list[int] = []
    chosen_set: set[int] = set()
    for v in sorted(eligible, key=lambda u: (-w[u], u)):
        if len(chosen) == cap:
            break
        if adj[v].isdisjoint(chosen_set):
            chosen.append(v)
            chosen_set.add(v)
    return sorted(chosen)


def solve_selection(
    weights,
    edges,
    cap: int,
    forced_zero=(),
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> SelectionResult:
    """Max-weight independent set of the conflict graph with |A| <= cap.

    Exact with a deterministic tie-break (lexicographically smallest
    optimal index set); on node-budget exhaustion returns the best
    incumbent flagged non-optimal.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("selection weights must be nonnegative")
    cap = int(cap)
    if cap <= 0:
        return SelectionResult((), 0.0, True)
    forced = {int(k) for k in forced_zero}
    eligible = [k for k in range(w.size) if w[k] > 0.0 and k not in forced]
    if not eligible:
        return SelectionResult((), 0.0, True)
    elig_set = set(eligible)
    adj: dict[int, set[int]] = {k: set() for k in eligible}
    edge_iter = edges.edges if isinstance(edges, ConflictGraph) else edges
    for a, b in edge_iter:
        a, b = int(a), int(b)
        if a in elig_set and b in elig_set and a != b:
            adj[a].add(b)
            adj[b].add(a)

    budget = _Budget(node_budget)
    free = sorted((k for k in eligible if not adj[k]), key=lambda u: (-w[u], u))
    comps = _components([k for k in eligible if adj[k]], adj)

    optimal = True
    profiles = []
    for comp in comps:
        prof, ok = _component_profile(comp, adj, w, min(cap, len(comp)), budget)
        profiles.append(prof)
        optimal &= ok

    # Budget DP across components, then top off with conflict-free UEs.
    dp = np.full(cap + 1, -np.inf)
    dp[0] = 0.0
    for prof in profiles:
        new = np.full(cap + 1, -np.inf)
        for s_prev in range(cap + 1):
            if not np.isfinite(dp[s_prev]):
                continue
            for s_c, val in enumerate(prof):
                if not np.isfinite(val) or s_prev + s_c > cap:
                    continue
                cand = dp[s_prev] + val
                if cand > new[s_prev + s_c]:
                    new[s_prev + s_c] = cand
        dp = new
    free_prefix = np.concatenate([[0.0], np.cumsum(w[free])])
    opt = 0.0
    for s in range(cap + 1):
        if not np.isfinite(dp[s]):
            continue
        opt = max(opt, dp[s] + free_prefix[min(cap - s, len(free))])

    tol = 1e-9 * (1.0 + abs(opt))
    reduced = sorted({v for comp in comps for v in comp} | set(free[:cap]))
    selected = _lex_dfs(reduced, adj, w, cap, opt, tol, budget)
    if selected is None:
        optimal = False
        selected = _greedy_selection(eligible, adj, w, cap)
    value = float(sum(w[v] for v in selected))
    return SelectionResult(tuple(selected), value, optimal)


def preselect(weights, k_tilde: int, candidates) -> np.ndarray:
    """Top-k_tilde candidate UEs by weight (ties to the smaller index);
    zero-weight UEs only pad below k_tilde, in index order."""
    cand = np.asarray(sorted(int(k) for k in candidates), dtype=int)
    w = np.asarray(weights, dtype=float)[cand]
    positive = cand[w > 0]
    order = np.lexsort((positive, -w[w > 0]))
    ranked = list(positive[order]) + list(cand[w <= 0])
    take = min(int(k_tilde), len(ranked))
    return np.array(sorted(ranked[:take]), dtype=int)


# ---------------------------------------------------------------------------
# Per-slot scheduling
# ---------------------------------------------------------------------------

class SchedulerState:
    """Per-UE virtual queues, rate windows and service accounting."""

    def __init__(self, n_ue: int, window_capacity: int):
        self.queues = np.zeros(n_ue)
        self.windows = [RateWindow(window_capacity) for _ in range(n_ue)]
        self.r_star = np.zeros(n_ue)
        self.r_bar = np.zeros(n_ue)
        self.served_bits = np.zeros(n_ue)
        self.active_count = np.zeros(n_ue, dtype=int)

    @property
    def n_ue(self) -> int:
        return self.queues.size

    def record_mi(self, ue_ids, values) -> None:
        for k, v in zip(ue_ids, values):
            win = self.windows[int(k)]
            win.record(float(v))
            self.r_star[k] = win.r_star
            self.r_bar[k] = win.r_bar


@dataclass
class SlotOutcome:
    slot: int
    active: np.ndarray        # sorted UE ids
    rates: np.ndarray         # (n_active,) allocated rates r*
    realized_mi: np.ndarray   # (n_active,)
    outage: np.ndarray        # (n_active,) bool
    service: np.ndarray       # (K,) per-UE service rate mu
    arrivals: np.ndarray | None
    suboptimal: bool = False


class SlotScheduler:
    """Runs start-up, DPP and baseline slots against one network drop."""

    STARTUP_PHASE = 0
    SCHED_PHASE = 1

    def __init__(self, config: SimConfig, lss: LargeScaleState, assoc: Association):
        self.cfg = config
        self.lss = lss
        self.assoc = assoc
        self.schedulable = np.array(
            [k for k in range(lss.K) if k not in assoc.excluded], dtype=int
        )
        self.static_graph = None
        if config.pilot_mode == "fixed":
            self.static_graph = build_conflict_graph(assoc, lss, config.eta_F)

    def _rng(self, phase: int, t: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, phase, t])

    # -- PHY realization ----------------------------------------------------

    def _realize(self, active: np.ndarray, pilots: np.ndarray, rng, rates):
        cfg = self.cfg
        truth = sample_channels(self.lss, cfg.F, rng, ues=active)
        est = estimate_channels(
            truth, self.assoc, self.lss, active, self.lss.snr, cfg.tau_p, rng,
            pilots=pilots,
        )
        comb = compute_combiners(est, self.assoc, active, self.lss.snr,
                                 fusion=cfg.fusion)
        if cfg.direction == "dl":
            record = dl_mutual_information(truth, comb, active, self.lss.snr)
        else:
            record = ul_mutual_information(truth, comb, active, self.lss.snr)
        mi = record.value
        delivered = mi > rates
        mu_active = cfg.se_penalty * rates * delivered
        return mi, ~delivered, mu_active

    def _finish_slot(self, state, t, active, pilots, arrivals, suboptimal, rng):
        active = np.asarray(sorted(int(k) for k in active), dtype=int)
        rates = state.r_star[active]
        service = np.zeros(state.n_ue)
        if active.size:
            mi, outage, mu_active = self._realize(active, pilots, rng, rates)
            service[active] = mu_active
        else:
            mi = np.zeros(0)
            outage = np.zeros(0, dtype=bool)
        if arrivals is not None:
            state.queues = np.maximum(state.queues - service, 0.0) + arrivals
        state.served_bits += service
        state.active_count[active] += 1
        if active.size:
            state.record_mi(active, mi)
        return SlotOutcome(
            slot=t, active=active, rates=rates, realized_mi=mi, outage=outage,
            service=service, arrivals=arrivals, suboptimal=suboptimal,
        )

    # -- DPP slot -----------------------------------------------------------

    def dpp_slot(self, state: SchedulerState, t: int) -> SlotOutcome:
        cfg = self.cfg
        rng = self._rng(self.SCHED_PHASE, t)
        arrivals = np.zeros(state.n_ue)
        sched = self.schedulable
        if cfg.scheduler_kind == "pf":
            arrivals[sched] = virtual_arrivals_pf(state.queues[sched], cfg.V, cfg.A_max)
        else:
            arrivals[sched] = virtual_arrivals_hf(state.queues[sched], cfg.V, cfg.A_max)

        weights = state.queues * state.r_bar
        if cfg.pilot_mode == "fixed":
            pilots = self.assoc.pilots
            result = solve_selection(weights, self.static_graph, cfg.K_act)
        else:
            pre = preselect(weights, cfg.K_tilde, sched)
            pilots, graph = reassign_pilots(pre, self.assoc, self.lss, cfg)
            masked = np.zeros_like(weights)
            masked[pre] = weights[pre]
            result = solve_selection(masked, graph, cfg.K_act)
        return self._finish_slot(
            state, t, np.array(result.selected, dtype=int), pilots, arrivals,
            suboptimal=not result.optimal, rng=rng,
        )

    # -- Baselines ----------------------------------------------------------

    def _drop_conflicts(self, ordered_members, graph: ConflictGraph,
                        limit: int | None = None) -> list[int]:
        """Keep members in priority order while they stay independent."""
        kept: list[int] = []
        kept_set: set[int] = set()
        for k in ordered_members:
            if limit is not None and len(kept) == limit:
                break
            if graph.neighbors(int(k)).isdisjoint(kept_set):
                kept.append(int(k))
                kept_set.add(int(k))
        return kept

    def _reassign_with_retry(self, candidates, rng):
        """Paper-style retry: same candidate set, new random order, until
        conflict-free or the retry budget runs out."""
        cand = sorted(int(k) for k in candidates)
        pilots, graph = reassign_pilots(cand, self.assoc, self.lss, self.cfg)
        attempt = 0
        while graph.edges and attempt < _REASSIGN_RETRIES:
            order = list(rng.permutation(cand))
            pilots, graph = reassign_pilots(cand, self.assoc, self.lss, self.cfg, order)
            attempt += 1
        return pilots, graph

    def _baseline_active(self, kind: str, state: SchedulerState, rng, t: int):
        cfg = self.cfg
        sched = self.schedulable
        n_pop = sched.size
        n_take = min(cfg.K_act, n_pop)
        if kind == "random":
            ordered = list(rng.permutation(sched))
        elif kind == "round_robin":
            ordered = [int(sched[(t + i) % n_pop]) for i in range(n_take)]
        elif kind == "max_sum_rate":
            ordered = None
        else:
            raise ValueError(f"unknown baseline {kind!r}")

        if cfg.pilot_mode == "fixed":
            graph = self.static_graph
            if kind == "max_sum_rate":
                weights = np.zeros(state.n_ue)
                weights[sched] = state.r_bar[sched]
                result = solve_selection(weights, graph, cfg.K_act)
                return np.array(result.selected, dtype=int), self.assoc.pilots, not result.optimal
            limit = n_take if kind == "random" else None
            kept = self._drop_conflicts(ordered, graph, limit)
            return np.array(sorted(kept), dtype=int), self.assoc.pilots, False

        # reassignment mode
        if kind == "max_sum_rate":
            weights = np.zeros(state.n_ue)
            weights[sched] = state.r_bar[sched]
            pre = preselect(weights, cfg.K_tilde, sched)
            pilots, graph = reassign_pilots(pre, self.assoc, self.lss, cfg)
            masked = np.zeros_like(weights)
            masked[pre] = weights[pre]
            result = solve_selection(masked, graph, cfg.K_act)
            return np.array(result.selected, dtype=int), pilots, not result.optimal
        if kind == "random":
            candidates = ordered[:n_take]
        else:
            candidates = ordered
        pilots, graph = self._reassign_with_retry(candidates, rng)
        kept = self._drop_conflicts(candidates, graph)
        return np.array(sorted(kept), dtype=int), pilots, False

    def baseline_slot(self, kind: str, state: SchedulerState, t: int) -> SlotOutcome:
        rng = self._rng(self.SCHED_PHASE, t)
        active, pilots, subopt = self._baseline_active(kind, state, rng, t)
        return self._finish_slot(state, t, active, pilots, arrivals=None,
                                 suboptimal=subopt, rng=rng)

    # -- Start-up -----------------------------------------------------------

    def startup_slot(self, state: SchedulerState, t: int) -> np.ndarray:
        """Random conflict-respecting activity; records windows only."""
        cfg = self.cfg
        rng = self._rng(self.STARTUP_PHASE, t)
        sched = self.schedulable
        n_take = min(cfg.K_act, sched.size)
        ordered = list(rng.permutation(sched))
        if cfg.pilot_mode == "fixed":
            kept = self._drop_conflicts(ordered, self.static_graph, n_take)
            active = np.array(sorted(kept), dtype=int)
            pilots = self.assoc.pilots
        else:
            candidates = ordered[:n_take]
            pilots, graph = self._reassign_with_retry(candidates, rng)
            active = np.array(sorted(self._drop_conflicts(candidates, graph)), dtype=int)
        if active.size:
            mi, _, _ = self._realize(active, pilots, rng, np.zeros(active.size))
            state.record_mi(active, mi)
        return active
