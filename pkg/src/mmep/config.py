"""Scenario configuration shared by the channel builders, receivers and
the Monte Carlo harness."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

ALGORITHMS = ("kf_m", "ks_m", "ep", "kf_tm", "ks_tm", "pcsi")
PILOT_DESIGNS = ("hadamard", "dft", "random")
INTERFERENCE_MODES = ("explicit", "gaussian")
DETECTORS = ("mmse", "ml")

# Sweepable fields and accepted spellings for keys that carry Greek names
# on the published interface.
SWEEP_FIELDS = ("M", "a", "T_d", "f_d", "rho", "T_p")
KEY_ALIASES = {"ρ": "rho", "ε": "epsilon", "eps": "epsilon"}


class ConfigError(ValueError):
    """Invalid scenario configuration (maps to CLI exit code 1)."""


@dataclass(frozen=True)
class SystemConfig:
    """All scenario parameters for one simulated uplink.

    Attributes
    ----------
    L, K, M : int
        Number of cells, single-antenna users per cell, and base
        station antennas.
    T_p, T_d : int
        Pilot preamble length and number of unknown data symbols per
        frame (frame length is ``T_p + T_d``).
    E_s_db : float
        Average symbol energy in dB (linear value via :attr:`energy`).
    a : float
        Cross gain between the serving base station and users in the
        other cells. ``a = 0`` switches interference off.
    rho : float
        Antenna correlation coefficient, entries decay as
        ``rho**|m - n|``.
    f_d : float
        Normalized maximum Doppler shift shared by all users.
    n, epsilon : int, float
        Iteration cap and relative-change tolerance of the iterative
        receiver.
    pilot_design : str
        "hadamard" (orthogonal), "dft" (orthogonal fallback for user
        counts that are not powers of two) or "random".
    interference_mode : str
        "explicit" simulates the interfering cells symbol by symbol,
        "gaussian" draws the aggregate disturbance from its covariance.
    detector : str
        Hard-decision rule used inside the semi-blind receivers.
    algorithms : tuple of str
        Subset of :data:`ALGORITHMS` to run per trial.
    trials, master_seed : int
        Monte Carlo batch size and the root of the seed tree.
    """

    L: int = 4
    K: int = 8
    M: int = 64
    T_p: int = 8
    T_d: int = 64
    E_s_db: float = 0.0
    a: float = 0.1
    rho: float = 0.0
    f_d: float = 0.01
    n: int = 10
    epsilon: float = 1e-6
    pilot_design: str = "hadamard"
    interference_mode: str = "explicit"
    detector: str = "mmse"
    algorithms: tuple = ALGORITHMS
    trials: int = 50
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        for name in ("L", "K", "M", "T_p", "n", "trials"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.T_d < 0:
            raise ConfigError("T_d must be non-negative")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho must lie in [0, 1)")
        if not 0.0 <= self.a <= 1.0:
            raise ConfigError("a must lie in [0, 1]")
        if self.f_d < 0.0:
            raise ConfigError("f_d must be non-negative")
        if self.epsilon <= 0.0:
            raise ConfigError("epsilon must be positive")
        if self.pilot_design not in PILOT_DESIGNS:
            raise ConfigError(f"unknown pilot_design {self.pilot_design!r}")
        if self.pilot_design != "random" and self.T_p < self.K:
            raise ConfigError("orthogonal pilot designs need T_p >= K")
        if self.interference_mode not in INTERFERENCE_MODES:
            raise ConfigError(f"unknown interference_mode {self.interference_mode!r}")
        if self.detector not in DETECTORS:
            raise ConfigError(f"unknown detector {self.detector!r}")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ConfigError(f"unknown algorithms {sorted(bad)}")

    @property
    def energy(self) -> float:
        """Average symbol energy on a linear scale."""
        return 10.0 ** (self.E_s_db / 10.0)

    @property
    def frame_len(self) -> int:
        return self.T_p + self.T_d

    def with_(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["algorithms"] = list(self.algorithms)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        clean = {}
        for key, value in raw.items():
            key = KEY_ALIASES.get(key, key)
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            clean[key] = value
        try:
            return cls(**clean)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "SystemConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(raw)

    @classmethod
    def desk_scale(cls, **overrides) -> "SystemConfig":
        """Reduced-size profile sized for minutes-long batches."""
        base = dict(L=4, K=4, M=32, T_p=4, T_d=32, trials=50)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def full_scale(cls, **overrides) -> "SystemConfig":
        """Full-size profile (expect long runtimes)."""
        base = dict(L=4, K=8, M=64, T_p=8, T_d=64, trials=200)
        base.update(overrides)
        return cls(**base)
