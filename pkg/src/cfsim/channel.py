"""Block-fading channel realizations and contaminated pilot-based estimates.

Channels follow h = sqrt(beta*M/|S|) * F_S * nu with F_S the DFT grid
columns selected by the link's angular support and nu i.i.d. unit-variance
circularly-symmetric complex normal. Estimation reproduces the
matched-filter output directly: own channel + projected co-pilot
contamination + projected noise of per-component variance 1/(tau_p*SNR).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import LargeScaleState


@dataclass
class ChannelBlock:
    """True channels for one slot: h[f, l, i, :] is the M-vector of link
    (RU l, UE ue_ids[i]) on resource block f."""

    h: np.ndarray          # (F, L, n, M) complex
    ue_ids: np.ndarray     # (n,)
    slot: int = 0


@dataclass
class EstimatedChannelBlock:
    """Pilot-based estimates, zero wherever the UE is inactive or not
    served by the RU."""

    h_hat: np.ndarray      # (F, L, n, M) complex
    ue_ids: np.ndarray
    slot: int = 0


def dft_matrix(M: int) -> np.ndarray:
    """Unitary M x M DFT matrix, [F]_{m,n} = exp(-2j pi m n / M)/sqrt(M)."""
    m = np.arange(M)
    return np.exp(-2j * np.pi * np.outer(m, m) / M) / np.sqrt(M)


def _ensure_mixers(lss: LargeScaleState) -> None:
    """Build zero-padded per-link DFT column stacks (cached on the state)."""
    if lss._mix is not None:
        return
    M = lss.M
    dft = dft_matrix(M)
    smax = max(len(s) for row in lss.supports for s in row)
    L, K = lss.L, lss.K
    mix = np.zeros((L, K, M, smax), dtype=complex)
    cols = np.zeros((L, K, M, smax), dtype=complex)
    for ell in range(L):
        for k in range(K):
            sup = lss.supports[ell][k]
            sel = dft[:, list(sup)]
            cols[ell, k, :, : len(sup)] = sel
            mix[ell, k, :, : len(sup)] = sel * np.sqrt(
                lss.beta[ell, k] * M / len(sup)
            )
    lss._mix = mix
    lss._cols = cols


def subspace_project(lss: LargeScaleState, ell: int, k: int, vec: np.ndarray) -> np.ndarray:
    """Project vec onto the span of link (ell, k)'s selected grid columns."""
    _ensure_mixers(lss)
    cols = lss._cols[ell, k]
    return cols @ (cols.conj().T @ vec)


def sample_channels(
    lss: LargeScaleState,
    F: int,
    rng: np.random.Generator,
    ues: np.ndarray | None = None,
    slot: int = 0,
) -> ChannelBlock:
    """Draw an i.i.d. channel block for the given UEs (all UEs if None)."""
    _ensure_mixers(lss)
    if ues is None:
        ues = np.arange(lss.K)
    ues = np.asarray(ues, dtype=int)
    mix = lss._mix[:, ues]                       # (L, n, M, smax)
    smax = mix.shape[-1]
    shape = (F, lss.L, len(ues), smax)
    nu = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    h = np.einsum("lkms,flks->flkm", mix, nu)
    return ChannelBlock(h=h, ue_ids=ues, slot=slot)


def estimate_channels(
    truth: ChannelBlock,
    assoc,
    lss: LargeScaleState,
    active,
    snr: float,
    tau_p: int,
    rng: np.random.Generator,
    pilots: np.ndarray | None = None,
) -> EstimatedChannelBlock:
    """Matched-filter + subspace-projected channel estimates.

    For each RU l and served active UE k: h_hat = P_{l,k}(sum of active
    co-pilot channels + noise), where the noise realization is shared by
    co-pilot UEs at the same RU (one matched-filter output per pilot).
    """
    _ensure_mixers(lss)
    if pilots is None:
        pilots = assoc.pilots
    active = np.asarray(sorted(int(k) for k in active), dtype=int)
    if any(pilots[k] < 0 for k in active):
        raise ValueError("active UE without an assigned pilot")

    F, L, n, M = truth.h.shape
    pos_of = {int(u): i for i, u in enumerate(truth.ue_ids)}
    act_pos = np.array([pos_of[k] for k in active], dtype=int)

    # Matched-filter outputs per (f, RU, pilot): co-pilot sum plus noise.
    y = np.zeros((F, L, tau_p, M), dtype=complex)
    act_pilots = np.asarray([int(pilots[k]) for k in active])
    for p in np.unique(act_pilots):
        members = act_pos[act_pilots == p]
        y[:, :, p, :] = truth.h[:, :, members, :].sum(axis=2)
    if np.isfinite(snr):
        scale = np.sqrt(1.0 / (2.0 * tau_p * snr))
        noise_shape = (F, L, tau_p, M)
        y += scale * (
            rng.standard_normal(noise_shape) + 1j * rng.standard_normal(noise_shape)
        )

    # Served-active link list, projected in one batch.
    l_idx, u_pos, u_ids = [], [], []
    for k, p_k in zip(active, act_pilots):
        for ell in assoc.clusters[k]:
            l_idx.append(ell)
            u_pos.append(pos_of[k])
            u_ids.append(k)
    h_hat = np.zeros_like(truth.h)
    if l_idx:
        l_idx = np.asarray(l_idx)
        u_pos = np.asarray(u_pos)
        u_ids = np.asarray(u_ids)
        p_idx = np.asarray([int(pilots[k]) for k in u_ids])
        x = y[:, l_idx, p_idx, :]                    # (F, npair, M)
        cols = lss._cols[l_idx, u_ids]               # (npair, M, smax)
        coef = np.einsum("pms,fpm->fps", cols.conj(), x)
        h_hat[:, l_idx, u_pos, :] = np.einsum("pms,fps->fpm", cols, coef)
    return EstimatedChannelBlock(h_hat=h_hat, ue_ids=truth.ue_ids, slot=truth.slot)
