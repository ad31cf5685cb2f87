"""Network topology on a torus and large-scale propagation state.

Pathloss follows the 3GPP TR 38.901 urban-microcell street-canyon model
(BS height 10 m, UE height 1.5 m, LOS sigma 4 dB / NLOS sigma 7.82 dB),
evaluated below the breakpoint distance. Angular subspaces follow the
single-ring local scattering model on the M-point DFT grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, SimConfig

BS_HEIGHT = 10.0
UE_HEIGHT = 1.5
HEIGHT_DELTA_SQ = (BS_HEIGHT - UE_HEIGHT) ** 2
SIGMA_SH_LOS = 4.0
SIGMA_SH_NLOS = 7.82
MIN_PATHLOSS_DIST = 1.0

_CALIBRATION_SEED = 0x5CA1E
_CALIBRATION_DRAWS = 200_000


@dataclass(frozen=True)
class NetworkGeometry:
    """RU and UE positions on the square torus."""

    ru_xy: np.ndarray   # (L, 2)
    ue_xy: np.ndarray   # (K, 2)
    area_side: float


@dataclass
class LargeScaleState:
    """Per-link large-scale state: LSFC, LOS flags, angular supports, SNR.

    supports[l][k] is the sorted tuple of DFT grid indices spanning the
    channel of link (RU l, UE k); support_masks holds the same sets as
    integer bitmasks for fast intersection tests. The implied covariance
    is (beta*M/|S|) * F_S F_S^H with F_S the selected DFT columns.
    """

    beta: np.ndarray                      # (L, K) linear LSFC
    los: np.ndarray                       # (L, K) bool
    supports: list[list[tuple[int, ...]]] # [L][K]
    support_masks: list[list[int]]        # [L][K]
    snr: float                            # transmit SNR (linear)
    M: int
    _mix: np.ndarray | None = field(default=None, repr=False)   # (L,K,M,smax) scaled
    _cols: np.ndarray | None = field(default=None, repr=False)  # (L,K,M,smax) unscaled

    @property
    def L(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]


def place_topology(config: SimConfig, rng: np.random.Generator) -> NetworkGeometry:
    """RUs at the centers of a uniform rectangular grid, UEs i.i.d. uniform."""
    nx, ny = config.grid_shape()
    if nx * ny != config.L:
        raise ConfigError(f"grid {nx}x{ny} does not tile L={config.L}")
    side = config.area_side
    xs = side * (np.arange(nx) + 0.5) / nx
    ys = side * (np.arange(ny) + 0.5) / ny
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    ru_xy = np.column_stack([gx.ravel(), gy.ravel()])
    ue_xy = rng.uniform(0.0, side, size=(config.K, 2))
    return NetworkGeometry(ru_xy=ru_xy, ue_xy=ue_xy, area_side=side)


def torus_displacement(from_xy: np.ndarray, to_xy: np.ndarray, side: float) -> np.ndarray:
    """Minimal wrapped displacement vectors from each row of from_xy to to_xy.

    Returns shape (len(from_xy), len(to_xy), 2) with components in
    [-side/2, side/2].
    """
    diff = to_xy[None, :, :] - from_xy[:, None, :]
    return diff - side * np.round(diff / side)


def torus_distance(a, b, side: float) -> float:
    """Minimum Euclidean distance between two points on the square torus."""
    diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    diff = diff - side * np.round(diff / side)
    return float(np.hypot(diff[0], diff[1]))


def los_probability(d2d):
    """UMi street-canyon LOS probability at 2-D distance d2d (meters)."""
    d = np.asarray(d2d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(d <= 18.0, 1.0, 18.0 / d + np.exp(-d / 36.0) * (1.0 - 18.0 / d))
    if np.ndim(d2d) == 0:
        return float(p)
    return p


def pathloss_db(d3d, los, fc_ghz: float):
    """UMi street-canyon pathloss in dB at 3-D distance d3d (meters).

    NLOS takes max(PL_LOS, PL'_NLOS) per the standard; the breakpoint
    second branch is not modelled (distances here stay far below it).
    """
    d3d = np.asarray(d3d, dtype=float)
    log_d = np.log10(d3d)
    log_fc = math.log10(fc_ghz)
    pl_los = 32.4 + 21.0 * log_d + 20.0 * log_fc
    pl_nlos = np.maximum(pl_los, 35.3 * log_d + 22.4 + 21.3 * log_fc)
    return np.where(los, pl_los, pl_nlos)


def pathloss_lsfc(d2d, los, shadow_draw, config: SimConfig):
    """Linear LSFC beta = 10^-(PL_dB + sigma_sh * shadow_draw)/10.

    d2d is clamped to 1 m; the 3-D distance adds the 8.5 m BS/UE height
    difference. shadow_draw is a standard normal deviate.
    """
    d2d = np.maximum(np.asarray(d2d, dtype=float), MIN_PATHLOSS_DIST)
    d3d = np.sqrt(d2d ** 2 + HEIGHT_DELTA_SQ)
    los = np.asarray(los, dtype=bool)
    pl = pathloss_db(d3d, los, config.fc_GHz)
    sigma = np.where(los, SIGMA_SH_LOS, SIGMA_SH_NLOS)
    beta = 10.0 ** (-(pl + sigma * np.asarray(shadow_draw, dtype=float)) / 10.0)
    if np.ndim(beta) == 0:
        return float(beta)
    return beta


def _wrap_angle(theta):
    """Wrap angles to (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def angular_support(theta: float, delta: float, M: int) -> tuple[int, ...]:
    """DFT grid indices whose angle 2*pi*m/M falls within delta/2 of theta.

    Boundaries are inclusive. If the interval captures no grid angle the
    single nearest grid angle is returned (smallest index on ties), so the
    support is never empty.
    """
    m = np.arange(M)
    grid = _wrap_angle(2.0 * np.pi * m / M)
    dist = np.abs(_wrap_angle(grid - theta))
    inside = dist <= delta / 2.0 + 1e-12
    if inside.any():
        return tuple(np.nonzero(inside)[0].tolist())
    return (int(np.argmin(dist)),)


def draw_large_scale(
    config: SimConfig, geom: NetworkGeometry, rng: np.random.Generator, snr: float
) -> LargeScaleState:
    """Draw LOS flags and shadowing, build LSFCs and angular supports."""
    disp = torus_displacement(geom.ru_xy, geom.ue_xy, geom.area_side)  # (L,K,2)
    dist = np.hypot(disp[..., 0], disp[..., 1])
    theta = np.arctan2(disp[..., 1], disp[..., 0])
    los = rng.random(dist.shape) < los_probability(dist)
    shadow = rng.standard_normal(dist.shape)
    beta = pathloss_lsfc(dist, los, shadow, config)
    supports, masks = [], []
    for ell in range(config.L):
        row_s, row_m = [], []
        for k in range(dist.shape[1]):
            sup = angular_support(float(theta[ell, k]), config.delta, config.M)
            row_s.append(sup)
            row_m.append(sum(1 << s for s in sup))
        supports.append(row_s)
        masks.append(row_m)
    return LargeScaleState(
        beta=beta, los=los, supports=supports, support_masks=masks,
        snr=snr, M=config.M,
    )


def mean_lsfc_at(
    d2d: float, config: SimConfig, n_draws: int, rng: np.random.Generator
) -> float:
    """Monte-Carlo mean LSFC at fixed distance over the LOS/shadowing mixture."""
    p_los = los_probability(d2d)
    los = rng.random(n_draws) < p_los
    shadow = rng.standard_normal(n_draws)
    return float(np.mean(pathloss_lsfc(np.full(n_draws, d2d), los, shadow, config)))


def calibrate_snr(config: SimConfig) -> float:
    """Transmit SNR from the 0 dB cell-edge rule beta_bar * M * SNR = 1.

    beta_bar is the mean LSFC at 2.5 * d_L with d_L = sqrt(A / (pi L)),
    estimated with a fixed-seed Monte-Carlo so the result depends only on
    the physics configuration, not the run seed.
    """
    area = config.area_side ** 2
    d_l = math.sqrt(area / (math.pi * config.L))
    rng = np.random.default_rng(_CALIBRATION_SEED)
    beta_bar = mean_lsfc_at(2.5 * d_l, config, _CALIBRATION_DRAWS, rng)
    return 1.0 / (config.M * beta_bar)


def build_network(config: SimConfig, rng: np.random.Generator):
    """Topology + calibration + large-scale draws in the canonical order."""
    geom = place_topology(config, rng)
    snr = calibrate_snr(config)
    lss = draw_large_scale(config, geom, rng, snr)
    return geom, lss
