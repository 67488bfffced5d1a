"""Scenario configuration, YAML io and per-subsystem seed streams."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import BadScenario, ConfigError

# stream ids for SeedSequence([seed, stream, ...]); fixed so that one subsystem
# drawing more numbers never shifts another's sequence
STREAMS = {"tasks": 1, "channel": 2, "agent": 3, "fl": 4, "infra": 5, "traffic": 6, "episodes": 7, "audit": 8}


def seed_stream(seed, name, *extra) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAMS[name], *map(int, extra)]))


def _default_rl():
    return {
        "episodes": 10000,
        "hidden": 64,
        "lr": 0.001,
        "gamma": 0.995,
        "batch": 64,
        "replay": 100000,
        "sync_every": 100,
        "eps_start": 1.0,
        "eps_end": 0.05,
        "eps_fraction": 0.2,
        "bins": 8,
        "grad_clip": 10.0,
    }


def _default_fl():
    return {
        "arch": "gru",
        "hidden": 64,
        "lookback": 60,
        "rounds": 150,
        "alpha": 1.0,
        "client_lr": 0.3,
        "tol": 1e-6,
        "window_stride": 10,
        "max_windows": 256,
        "checkpoint": None,
    }


def _default_traffic():
    return {
        "seconds": 3600,
        "util_range": [0.5, 0.85],
        "amplitude": [0.2, 0.4],
        "period": [300.0, 900.0],
        "slow_noise": 0.03,
        "fast_noise": 0.08,
    }


def _coerce(name, value, default):
    """Numbers given as strings (YAML reads ``1e-6`` as text) become numbers."""
    if isinstance(default, dict) and isinstance(value, dict):
        return {k: _coerce(f"{name}.{k}", v, default.get(k)) for k, v in value.items()}
    numeric = isinstance(default, (int, float)) and not isinstance(default, bool)
    if not isinstance(value, str) or not (numeric or name in _OPTIONAL_NUMBERS):
        return value
    try:
        return int(value) if isinstance(default, int) else float(value)
    except ValueError:
        raise BadScenario(f"{name}: expected a number, got {value!r}") from None


_OPTIONAL_NUMBERS = ("matrix_transfer_delay",)


@dataclass
class Scenario:
    n_devices: int = 65
    bits_range: tuple = (1e6, 8e6)
    deadline_range: tuple = (0.2, 1.2)
    workload: float = 737.0
    device_cpu: float = 2e9
    hold_range: tuple = (0.1, 0.5)
    tx_power_dbm: float = 27.0
    noise_dbm: float = -100.0
    gain_db_range: tuple = (-110.0, -90.0)
    bandwidth_range: tuple = (25e6, 32e6)
    n_orus: int = 3
    n_ecs: int = 3
    fronthaul_capacity: tuple = (6000.0, 6500.0)  # Mbps
    ec_link_capacity: tuple = (7000.0, 7500.0)  # Mbps
    rc_link_capacity: tuple = (7000.0, 7500.0)  # Mbps
    ec_cpu_range: tuple = (10e9, 30e9)
    rc_cpu_range: tuple = (20e9, 40e9)
    reserve: float = 0.0
    peer_distance_range: tuple = (5e3, 20e3)  # m
    rc_distance_range: tuple = (100e3, 200e3)  # m
    admission: str = "semantic"
    weights: tuple = (0.5, 1e-7, 1e-4, 1e-10)
    horizon: int = 64
    frame_seconds: float = 1.0
    routing_mode: str = "min_delay"
    routing_info: str = "forecast"
    matrix_bits_per_sample: int = 64
    matrix_transfer_delay: float | None = None
    topology: dict | None = None
    traffic: dict = field(default_factory=_default_traffic)
    rl: dict = field(default_factory=_default_rl)
    fl: dict = field(default_factory=_default_fl)
    instance_seed: int = 0
    eval_episodes: int = 200  # fixed-policy rollouts (placement comparison)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            default = f.default_factory() if f.default is dataclasses.MISSING else f.default
            setattr(self, f.name, _coerce(f.name, getattr(self, f.name), default))
        for name in ("bits_range", "deadline_range", "hold_range", "gain_db_range", "bandwidth_range",
                     "fronthaul_capacity", "ec_link_capacity", "rc_link_capacity", "ec_cpu_range",
                     "rc_cpu_range", "peer_distance_range", "rc_distance_range", "weights"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))
        self.traffic = {**_default_traffic(), **(self.traffic or {})}
        self.rl = {**_default_rl(), **(self.rl or {})}
        self.fl = {**_default_fl(), **(self.fl or {})}
        self.validate()

    def validate(self):
        for name in ("bits_range", "deadline_range", "hold_range", "gain_db_range", "bandwidth_range",
                     "fronthaul_capacity", "ec_link_capacity", "rc_link_capacity", "ec_cpu_range",
                     "rc_cpu_range", "peer_distance_range", "rc_distance_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise BadScenario(f"{name}: low {lo} exceeds high {hi}")
        for name in ("n_devices", "n_orus", "n_ecs", "horizon", "eval_episodes"):
            if int(getattr(self, name)) <= 0:
                raise BadScenario(f"{name} must be positive")
        if min(self.bits_range) <= 0 or min(self.deadline_range) <= 0 or self.workload <= 0:
            raise BadScenario("task sizes, deadlines and workload must be positive")
        if self.device_cpu <= 0 or min(self.ec_cpu_range) <= 0 or min(self.rc_cpu_range) <= 0:
            raise BadScenario("compute capacities must be positive")
        if len(self.weights) != 4 or min(self.weights) < 0:
            raise BadScenario("four non-negative penalty weights expected")
        if self.admission not in ("semantic", "literal"):
            raise BadScenario(f"unknown admission mode {self.admission!r}")
        if self.routing_info not in ("forecast", "raw"):
            raise BadScenario(f"unknown routing information mode {self.routing_info!r}")
        if int(self.rl["episodes"]) <= 0:
            raise BadScenario("episode count must be positive")
        if self.matrix_transfer_delay is not None and self.matrix_transfer_delay < 0:
            raise BadScenario("matrix transfer delay cannot be negative")
        if self.topology is None and (self.n_orus > 3 or self.n_ecs > 3):
            raise BadScenario("the default cube hosts at most 3 O-RUs and 3 ECs")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        if not isinstance(d, dict):
            raise ConfigError("scenario config must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(d))

    def replace(self, **kw) -> "Scenario":
        d = self.to_dict()
        for k, v in kw.items():
            if k in ("rl", "fl", "traffic") and isinstance(v, dict):
                d[k] = {**d[k], **v}
            else:
                d[k] = v
        return Scenario.from_dict(d)

    def digest(self, keys=None) -> str:
        d = self.to_dict()
        if keys is not None:
            d = {k: d[k] for k in keys}
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def default_scenario() -> Scenario:
    return Scenario()


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if "scenario" in raw:
        raw = raw["scenario"] or {}
    return Scenario.from_dict(raw)


def dump_scenario(s: Scenario, path=None) -> str:
    text = yaml.safe_dump(s.to_dict(), sort_keys=False)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
