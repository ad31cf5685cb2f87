"""Simulation configuration and the flat key-value config file format.

Units: lengths in meters, frequencies in Hz except the carrier frequency
(fc_GHz), thresholds and SNR linear, rates in bit/s/Hz unless noted.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Raised for an invalid or inconsistent simulation configuration."""


SCHEDULER_KINDS = ("pf", "hf", "random", "round_robin", "max_sum_rate")
SCHEDULER_ALIASES = {"rr": "round_robin", "maxsum": "max_sum_rate"}
PILOT_MODES = ("fixed", "reassign")
DIRECTIONS = ("ul", "dl")


@dataclass
class SimConfig:
    """All knobs of one simulation run.

    K_tot_f1 is the per-subchannel population at F=1; a run simulates
    K = F * K_tot_f1 users on a single subchannel of F resource blocks.
    """

    area_side: float = 200.0     # m, square torus side
    L: int = 20                  # RUs
    M: int = 10                  # antennas per RU
    K_tot_f1: int = 120          # UEs per subchannel at F=1
    K_act: int = 70              # max simultaneously active UEs
    K_tilde: int = 80            # pre-selection size for pilot reassignment
    tau_p: int = 20              # pilot dimension (symbols)
    T: int = 200                 # symbols per resource block
    F: int = 1                   # resource blocks per subchannel
    W_rb: float = 720e3          # Hz per resource block
    eta: float = 1.0             # association SNR threshold (linear)
    C_max: int = 7               # max cluster size
    eta_F: float = 0.0           # subspace non-orthogonality threshold
    delta: float = math.pi / 8   # angular spread (rad)
    V: float = 5000.0            # drift-plus-penalty weight
    A_max: float = 100.0         # max virtual arrival (bit/s/Hz)
    N_window: int = 100          # mutual-information sample window
    N_init: int = 500            # start-up slots
    fc_GHz: float = 3.5          # carrier frequency (GHz)
    seed: int = 1
    scheduler_kind: str = "pf"
    pilot_mode: str = "fixed"
    direction: str = "ul"
    n_slots: int = 2000          # scheduling slots after start-up
    ru_grid: tuple[int, int] | None = None  # (nx, ny); auto-derived if None
    fusion: str = "mmse"         # cluster fusion weights: mmse | energy

    @property
    def K(self) -> int:
        """Effective UE population on the simulated subchannel."""
        return self.F * self.K_tot_f1

    @property
    def se_penalty(self) -> float:
        """Spectral-efficiency penalty factor 1 - tau_p/T."""
        return 1.0 - self.tau_p / self.T

    def grid_shape(self) -> tuple[int, int]:
        """RU grid (nx, ny); nx*ny must equal L."""
        if self.ru_grid is not None:
            nx, ny = self.ru_grid
            if nx * ny != self.L:
                raise ConfigError(f"ru_grid {nx}x{ny} does not tile L={self.L} RUs")
            return int(nx), int(ny)
        nx = max(d for d in range(1, int(math.isqrt(self.L)) + 1) if self.L % d == 0)
        return nx, self.L // nx

    def validate(self) -> None:
        if self.scheduler_kind in SCHEDULER_ALIASES:
            self.scheduler_kind = SCHEDULER_ALIASES[self.scheduler_kind]
        if self.scheduler_kind not in SCHEDULER_KINDS:
            raise ConfigError(f"unknown scheduler_kind {self.scheduler_kind!r}")
        if self.pilot_mode not in PILOT_MODES:
            raise ConfigError(f"unknown pilot_mode {self.pilot_mode!r}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"unknown direction {self.direction!r}")
        if not (1 <= self.K_act <= self.K_tilde <= self.K):
            raise ConfigError(
                f"need K_act <= K_tilde <= K, got {self.K_act}, {self.K_tilde}, {self.K}"
            )
        if not self.tau_p < self.T:
            raise ConfigError(f"need tau_p < T, got {self.tau_p} >= {self.T}")
        if self.F < 1:
            raise ConfigError("F must be >= 1")
        if self.C_max < 1:
            raise ConfigError("C_max must be >= 1")
        if self.eta_F < 0:
            raise ConfigError("eta_F must be >= 0")
        if self.V <= 0 or self.A_max <= 0:
            raise ConfigError("V and A_max must be > 0")
        if self.L < 1 or self.M < 1 or self.tau_p < 1:
            raise ConfigError("L, M and tau_p must be >= 1")
        if self.area_side <= 0 or self.W_rb <= 0 or self.fc_GHz <= 0:
            raise ConfigError("area_side, W_rb and fc_GHz must be > 0")
        if self.N_window < 1 or self.N_init < 0 or self.n_slots < 0:
            raise ConfigError("N_window >= 1, N_init >= 0 and n_slots >= 0 required")
        if self.fusion not in ("mmse", "energy"):
            raise ConfigError(f"unknown fusion rule {self.fusion!r}")
        self.grid_shape()

    def to_mapping(self) -> dict:
        d = dataclasses.asdict(self)
        if d["ru_grid"] is not None:
            d["ru_grid"] = list(d["ru_grid"])
        return d

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SimConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


_INT_KEYS = {
    "L", "M", "K_tot_f1", "K_act", "K_tilde", "tau_p", "T", "F",
    "C_max", "N_window", "N_init", "seed", "n_slots",
}
_FLOAT_KEYS = {
    "area_side", "W_rb", "eta", "eta_F", "delta", "V", "A_max", "fc_GHz",
}
_STR_KEYS = {"scheduler_kind", "pilot_mode", "direction", "fusion"}


def _coerce(key: str, raw):
    if key == "ru_grid":
        if raw is None or (isinstance(raw, str) and raw.lower() in ("", "none", "auto")):
            return None
        if isinstance(raw, str):
            parts = raw.lower().replace("x", " ").split()
            if len(parts) != 2:
                raise ConfigError(f"ru_grid must look like '4x5', got {raw!r}")
            return (int(parts[0]), int(parts[1]))
        return (int(raw[0]), int(raw[1]))
    if key in _INT_KEYS:
        return int(float(raw)) if isinstance(raw, str) else int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _STR_KEYS:
        return str(raw).strip().lower()
    raise ConfigError(f"unknown config key {key!r}")


def parse_config_file(path: str | Path) -> SimConfig:
    """Parse a flat `key = value` text file into a validated SimConfig.

    Blank lines and `#` comments are ignored; keys mirror SimConfig fields.
    """
    mapping = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" in stripped:
            key, _, value = stripped.partition("=")
        else:
            parts = stripped.split(None, 1)
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: cannot parse {line!r}")
            key, value = parts
        key, value = key.strip(), value.strip()
        if key in mapping:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        mapping[key] = value
    return SimConfig.from_mapping(mapping)
