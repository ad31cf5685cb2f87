"""User-centric clustering, greedy pilot assignment, and the conflict graph.

A UE pair is in conflict when it shares an RU, shares a pilot, and the
per-RU channel subspaces overlap (Frobenius norm of the cross-Gram above
eta_F) at some shared RU. Pilot indices are 0-based internally and 1-based
in any human-facing report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SimConfig
from .geometry import LargeScaleState


@dataclass
class Association:
    """Cluster map, its RU-side inverse, and per-UE pilot indices (-1 if
    unassigned). excluded lists UEs whose cluster came out empty."""

    clusters: list[tuple[int, ...]]
    served: list[tuple[int, ...]]
    pilots: np.ndarray
    excluded: frozenset[int] = frozenset()


@dataclass(frozen=True)
class ConflictGraph:
    edges: frozenset[tuple[int, int]]
    _adj: dict = field(default_factory=dict, repr=False, compare=False)

    def adjacency(self) -> dict[int, set[int]]:
        if not self._adj and self.edges:
            for a, b in self.edges:
                self._adj.setdefault(a, set()).add(b)
                self._adj.setdefault(b, set()).add(a)
        return self._adj

    def neighbors(self, k: int) -> set[int]:
        return self.adjacency().get(k, set())

    def independent(self, members) -> bool:
        mset = set(members)
        return all(self.neighbors(k).isdisjoint(mset) for k in mset)


def subspace_overlap(support_a, support_b) -> float:
    """Frobenius norm of the cross-Gram of two grid-column subspaces,
    which reduces to sqrt(|A intersect B|)."""
    return math.sqrt(len(set(support_a) & set(support_b)))


def _masks_overlap(mask_a: int, mask_b: int, eta_f: float) -> bool:
    return math.sqrt((mask_a & mask_b).bit_count()) > eta_f


def form_clusters(lss: LargeScaleState, config: SimConfig) -> Association:
    """Up to C_max RUs per UE among those with beta >= eta/(M*SNR),
    strongest first; ties broken by lower RU index."""
    threshold = config.eta / (config.M * lss.snr)
    L, K = lss.L, lss.K
    clusters: list[tuple[int, ...]] = []
    excluded = set()
    for k in range(K):
        candidates = [ell for ell in range(L) if lss.beta[ell, k] >= threshold]
        candidates.sort(key=lambda ell: (-lss.beta[ell, k], ell))
        chosen = tuple(candidates[: config.C_max])
        clusters.append(chosen)
        if not chosen:
            excluded.add(k)
    served: list[list[int]] = [[] for _ in range(L)]
    for k, cluster in enumerate(clusters):
        for ell in cluster:
            served[ell].append(k)
    return Association(
        clusters=clusters,
        served=[tuple(s) for s in served],
        pilots=np.full(K, -1, dtype=int),
        excluded=frozenset(excluded),
    )


def _greedy_assign(
    order, clusters, masks, tau_p: int, eta_f: float, n_ue: int
) -> np.ndarray:
    """Greedy min-conflict pilot assignment over UEs in the given order.

    Each UE takes the pilot minimizing the number of already-assigned,
    subspace-overlapping UEs sharing one of its RUs; ties go to the
    smallest pilot index.
    """
    pilots = np.full(n_ue, -1, dtype=int)
    by_ru_pilot: dict[tuple[int, int], list[int]] = {}
    for k in order:
        best_p, best_count = 0, None
        for p in range(tau_p):
            conflicting: set[int] = set()
            for ell in clusters[k]:
                for other in by_ru_pilot.get((ell, p), ()):
                    if _masks_overlap(masks[ell][k], masks[ell][other], eta_f):
                        conflicting.add(other)
            count = len(conflicting)
            if best_count is None or count < best_count:
                best_p, best_count = p, count
                if count == 0:
                    break
        pilots[k] = best_p
        for ell in clusters[k]:
            by_ru_pilot.setdefault((ell, best_p), []).append(k)
    return pilots


def assign_pilots_fixed(
    assoc: Association, lss: LargeScaleState, config: SimConfig
) -> Association:
    """Assign pilots to all UEs in ascending index order (fixed mode)."""
    pilots = _greedy_assign(
        range(lss.K), assoc.clusters, lss.support_masks,
        config.tau_p, config.eta_F, lss.K,
    )
    return Association(
        clusters=assoc.clusters, served=assoc.served,
        pilots=pilots, excluded=assoc.excluded,
    )


def build_conflict_graph(
    assoc: Association,
    lss: LargeScaleState,
    eta_f: float,
    scope=None,
    pilots: np.ndarray | None = None,
) -> ConflictGraph:
    """Edges between scope UEs sharing an RU, a pilot, and an overlapping
    subspace at some shared RU."""
    if pilots is None:
        pilots = assoc.pilots
    if scope is None:
        scope_set = {k for k in range(len(assoc.clusters)) if pilots[k] >= 0}
    else:
        scope_set = {int(k) for k in scope}
    edges = set()
    masks = lss.support_masks
    for ell, members in enumerate(assoc.served):
        in_scope = [k for k in members if k in scope_set]
        by_pilot: dict[int, list[int]] = {}
        for k in in_scope:
            by_pilot.setdefault(int(pilots[k]), []).append(k)
        for group in by_pilot.values():
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    if _masks_overlap(masks[ell][a], masks[ell][b], eta_f):
                        edges.add((a, b) if a < b else (b, a))
    return ConflictGraph(edges=frozenset(edges))


def reassign_pilots(
    preselected,
    assoc: Association,
    lss: LargeScaleState,
    config: SimConfig,
    attempt_order=None,
) -> tuple[np.ndarray, ConflictGraph]:
    """Per-slot greedy pilot assignment restricted to the preselected UEs.

    Returns the resulting pilots (-1 outside the preselected set) and the
    conflict graph over the preselected set.
    """
    pre = sorted(int(k) for k in preselected)
    order = pre if attempt_order is None else [int(k) for k in attempt_order]
    if sorted(order) != pre:
        raise ValueError("attempt_order must permute the preselected set")
    pilots = _greedy_assign(
        order, assoc.clusters, lss.support_masks,
        config.tau_p, config.eta_F, lss.K,
    )
    graph = build_conflict_graph(assoc, lss, config.eta_F, scope=pre, pilots=pilots)
    return pilots, graph


def export_conflict_edges(graph: ConflictGraph, path: str | Path) -> Path:
    """Debug dump: one 'k kprime' pair per line, sorted."""
    path = Path(path)
    lines = [f"{a} {b}" for a, b in sorted(graph.edges)]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8", newline="\n")
    return path
