import math

import numpy as np
import pytest

from cfsim.association import Association
from cfsim.channel import (
    dft_matrix,
    estimate_channels,
    sample_channels,
    subspace_project,
)
from cfsim.geometry import LargeScaleState


def make_state(supports, beta=None, M=8, snr=1e4):
    """LargeScaleState from explicit per-(RU, UE) supports."""
    L = len(supports)
    K = len(supports[0])
    beta = np.ones((L, K)) if beta is None else np.asarray(beta, dtype=float)
    masks = [[sum(1 << s for s in supports[l][k]) for k in range(K)] for l in range(L)]
    return LargeScaleState(
        beta=beta, los=np.zeros((L, K), dtype=bool),
        supports=[list(r) for r in supports], support_masks=masks, snr=snr, M=M,
    )


def make_assoc(clusters, pilots, L):
    served = [[] for _ in range(L)]
    for k, c in enumerate(clusters):
        for ell in c:
            served[ell].append(k)
    return Association(
        clusters=[tuple(c) for c in clusters],
        served=[tuple(s) for s in served],
        pilots=np.asarray(pilots, dtype=int),
        excluded=frozenset(k for k, c in enumerate(clusters) if not c),
    )


class TestSampling:
    def test_full_support_energy(self):
        M = 8
        sup = tuple(range(M))
        lss = make_state([[sup, sup]], beta=[[2.0, 0.5]], M=M)
        # RB axis doubles as the draw axis (realizations are i.i.d. across f)
        block = sample_channels(lss, 10_000, np.random.default_rng(0))
        for k, beta in enumerate([2.0, 0.5]):
            energy = np.mean(np.sum(np.abs(block.h[:, 0, k, :]) ** 2, axis=-1))
            assert energy == pytest.approx(beta * M, rel=0.03)

    def test_trace_recovers_lsfc(self):
        M = 6
        sup = (0, 2, 5)
        lss = make_state([[sup]], beta=[[1.7]], M=M)
        block = sample_channels(lss, 10_000, np.random.default_rng(1))
        trace = np.mean(np.sum(np.abs(block.h[:, 0, 0, :]) ** 2, axis=-1)) / M
        assert trace == pytest.approx(1.7, rel=0.03)

    def test_zero_lsfc_gives_zero_vector(self):
        lss = make_state([[(0, 1)]], beta=[[0.0]], M=4)
        block = sample_channels(lss, 5, np.random.default_rng(2))
        assert np.all(block.h == 0)

    def test_channel_in_subspace(self):
        sup = (1, 3)
        lss = make_state([[sup]], M=6)
        block = sample_channels(lss, 4, np.random.default_rng(3))
        for f in range(4):
            h = block.h[f, 0, 0]
            proj = subspace_project(lss, 0, 0, h)
            assert np.linalg.norm(proj - h) <= 1e-12 * np.linalg.norm(h)

    def test_iid_across_rbs(self):
        lss = make_state([[tuple(range(4))]], M=4)
        block = sample_channels(lss, 2, np.random.default_rng(4))
        # correlate entries of f=0 against f=1 over repeated slots
        xs, ys = [], []
        for seed in range(2_500):
            b = sample_channels(lss, 2, np.random.default_rng(seed + 10))
            xs.extend(b.h[0, 0, 0].real)
            ys.extend(b.h[1, 0, 0].real)
        corr = np.corrcoef(xs, ys)[0, 1]
        assert abs(corr) <= 0.05


class TestEstimation:
    def test_single_active_infinite_snr_exact(self):
        sup = (0, 3, 4)
        lss = make_state([[sup]], M=6, snr=np.inf)
        assoc = make_assoc([(0,)], [0], L=1)
        truth = sample_channels(lss, 3, np.random.default_rng(5))
        est = estimate_channels(truth, assoc, lss, [0], np.inf, 4,
                                np.random.default_rng(6))
        assert np.allclose(est.h_hat, truth.h, atol=1e-12)

    def test_disjoint_supports_kill_contamination(self):
        lss = make_state([[(0, 1), (2, 3)]], M=6, snr=np.inf)
        assoc = make_assoc([(0,), (0,)], [0, 0], L=1)  # same pilot, both served
        truth = sample_channels(lss, 2, np.random.default_rng(7))
        est = estimate_channels(truth, assoc, lss, [0, 1], np.inf, 4,
                                np.random.default_rng(8))
        assert np.allclose(est.h_hat, truth.h, atol=1e-12)

    def test_identical_supports_sum_channels(self):
        sup = (1, 2)
        lss = make_state([[sup, sup]], M=6, snr=np.inf)
        assoc = make_assoc([(0,), (0,)], [0, 0], L=1)
        truth = sample_channels(lss, 2, np.random.default_rng(9))
        est = estimate_channels(truth, assoc, lss, [0, 1], np.inf, 4,
                                np.random.default_rng(10))
        combined = truth.h[:, 0, 0] + truth.h[:, 0, 1]
        assert np.allclose(est.h_hat[:, 0, 0], combined, atol=1e-12)
        assert np.allclose(est.h_hat[:, 0, 1], combined, atol=1e-12)

    def test_estimation_noise_power(self):
        sup = (0, 2, 5)
        snr, tau_p = 50.0, 8
        lss = make_state([[sup]], M=6, snr=snr)
        assoc = make_assoc([(0,)], [0], L=1)
        truth = sample_channels(lss, 10_000, np.random.default_rng(11))
        est = estimate_channels(truth, assoc, lss, [0], snr, tau_p,
                                np.random.default_rng(12))
        err = np.mean(np.sum(np.abs(est.h_hat[:, 0, 0] - truth.h[:, 0, 0]) ** 2, axis=-1))
        assert err == pytest.approx(len(sup) / (tau_p * snr), rel=0.05)

    def test_zero_block_pattern(self):
        sup = (0, 1)
        supports = [[sup, sup, sup], [sup, sup, sup]]
        lss = make_state(supports, M=4, snr=100.0)
        # UE0 served by RU0 only, UE1 by both, UE2 by RU1 but inactive
        assoc = make_assoc([(0,), (0, 1), (1,)], [0, 1, 2], L=2)
        truth = sample_channels(lss, 2, np.random.default_rng(13))
        est = estimate_channels(truth, assoc, lss, [0, 1], 100.0, 4,
                                np.random.default_rng(14))
        assert np.any(est.h_hat[:, 0, 0] != 0)
        assert np.all(est.h_hat[:, 1, 0] == 0)      # UE0 not served by RU1
        assert np.any(est.h_hat[:, 0, 1] != 0)
        assert np.any(est.h_hat[:, 1, 1] != 0)
        assert np.all(est.h_hat[:, :, 2, :] == 0)   # UE2 inactive

    def test_active_without_pilot_rejected(self):
        lss = make_state([[(0,)]], M=4)
        assoc = make_assoc([(0,)], [-1], L=1)
        truth = sample_channels(lss, 1, np.random.default_rng(15))
        with pytest.raises(ValueError):
            estimate_channels(truth, assoc, lss, [0], 10.0, 4,
                              np.random.default_rng(16))


class TestProjection:
    def test_idempotence(self):
        lss = make_state([[(0, 2), (1, 3, 4)]], M=6)
        r = np.random.default_rng(17)
        for k in (0, 1):
            x = r.standard_normal(6) + 1j * r.standard_normal(6)
            once = subspace_project(lss, 0, k, x)
            twice = subspace_project(lss, 0, k, once)
            assert np.linalg.norm(twice - once) <= 1e-10 * np.linalg.norm(x)

    def test_dft_unitary(self):
        for m in (1, 4, 9):
            f = dft_matrix(m)
            assert np.allclose(f.conj().T @ f, np.eye(m), atol=1e-12)
