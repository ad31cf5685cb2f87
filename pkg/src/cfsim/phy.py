"""Local MMSE combining, cluster fusion, UL/DL SINR and mutual information.

Per RU: v = (sum of served-active estimate outer products + SNR^-1 I)^-1
h_hat. Two pluggable cluster-fusion weight rules, both followed by global
normalization to a unit-norm overall vector:

- "mmse" (default): w = 1/(1 - h_hat^H v), which rescales each block to
  B^-1 h_hat (B = nominal interference-plus-noise covariance), the
  max-SNR combination of the per-RU soft outputs under the local model;
- "energy": w = ||h_hat||^2, plain energy-proportional maximum-ratio
  fusion.

The DL reuses the UL combiners as equal-power precoders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelBlock, EstimatedChannelBlock

UNIT_NORM_TOL = 1e-9


@dataclass
class CombinerSet:
    """Overall combining vectors, stored as per-RU M-blocks.

    v[f, l, i, :] is the block of UE ue_ids[i] at RU l on RB f; blocks
    outside the UE's cluster are zero and each stacked vector has unit norm.
    """

    v: np.ndarray        # (F, L, n, M) complex
    w: np.ndarray        # (F, L, n) real fusion weights
    ue_ids: np.ndarray


@dataclass
class MutualInfoRecord:
    """Per-UE instantaneous mutual information (bit/s/Hz), RB-averaged."""

    value: np.ndarray        # (n,)
    per_rb_sinr: np.ndarray  # (n, F)
    ue_ids: np.ndarray


FUSION_RULES = ("mmse", "energy")


def compute_combiners(
    est: EstimatedChannelBlock, assoc, active, snr: float, fusion: str = "mmse"
) -> CombinerSet:
    """Local MMSE vectors fused into unit-norm overall combiners."""
    if not np.isfinite(snr) or snr <= 0:
        raise ValueError("combining needs a finite positive SNR")
    if fusion not in FUSION_RULES:
        raise ValueError(f"unknown fusion rule {fusion!r}")
    active = np.asarray(sorted(int(k) for k in active), dtype=int)
    pos_of = {int(u): i for i, u in enumerate(est.ue_ids)}
    act_pos = np.array([pos_of[k] for k in active], dtype=int)
    hh = est.h_hat[:, :, act_pos, :]                     # (F, L, n, M)
    F, L, n, M = hh.shape

    cov = np.einsum("flkm,flkn->flmn", hh, hh.conj())
    cov += np.eye(M) / snr
    rhs = hh.transpose(0, 1, 3, 2)                       # (F, L, M, n)
    v = np.linalg.solve(cov, rhs).transpose(0, 1, 3, 2)  # (F, L, n, M)

    if fusion == "energy":
        w = np.einsum("flkm,flkm->flk", hh, hh.conj()).real
    else:
        # h_hat^H v = gamma/(1+gamma) < 1; w = 1+gamma undoes the
        # Sherman-Morrison shrinkage so blocks fuse as B^-1 h_hat
        x = np.einsum("flkm,flkm->flk", hh.conj(), v).real
        w = np.where(x > 0, 1.0 / np.maximum(1.0 - x, 1e-12), 0.0)
    stacked = w[..., None] * v
    norms = np.sqrt(np.einsum("flkm,flkm->fk", stacked, stacked.conj()).real)
    if np.any(norms <= 0):
        raise RuntimeError("all-zero overall combiner for an active UE")
    stacked = stacked / norms[:, None, :, None]
    return CombinerSet(v=stacked, w=w, ue_ids=active)


def _cross_gains(truth: ChannelBlock, comb: CombinerSet, active) -> np.ndarray:
    """G[f, k, j] = v_k(f)^H h_j(f) over the active set (both in comb order)."""
    active = np.asarray(sorted(int(k) for k in active), dtype=int)
    if not np.array_equal(active, comb.ue_ids):
        raise ValueError("combiner set does not match the active set")
    pos_of = {int(u): i for i, u in enumerate(truth.ue_ids)}
    act_pos = np.array([pos_of[k] for k in active], dtype=int)
    h = truth.h[:, :, act_pos, :]
    return np.einsum("flkm,fljm->fkj", comb.v.conj(), h)


def ul_mutual_information(
    truth: ChannelBlock, comb: CombinerSet, active, snr: float
) -> MutualInfoRecord:
    """UL SINR and RB-averaged mutual information from the true channels."""
    g = _cross_gains(truth, comb, active)
    power = np.abs(g) ** 2                     # (F, n, n)
    sig = np.einsum("fkk->fk", power)
    interference = power.sum(axis=2) - sig     # sum over j != k of |v_k^H h_j|^2
    sinr = sig / (1.0 / snr + interference)
    value = np.mean(np.log2(1.0 + sinr), axis=0)
    return MutualInfoRecord(value=value, per_rb_sinr=sinr.T, ue_ids=comb.ue_ids)


def dl_mutual_information(
    truth: ChannelBlock, comb: CombinerSet, active, snr: float
) -> MutualInfoRecord:
    """DL SINR with the UL combiners reused as equal-power precoders."""
    g = _cross_gains(truth, comb, active)
    power = np.abs(g) ** 2
    sig = np.einsum("fkk->fk", power)
    interference = power.sum(axis=1) - sig     # sum over j != k of |h_k^H v_j|^2
    sinr = sig / (1.0 / snr + interference)
    value = np.mean(np.log2(1.0 + sinr), axis=0)
    return MutualInfoRecord(value=value, per_rb_sinr=sinr.T, ue_ids=comb.ue_ids)
