"""Fronthaul traffic matrices: synthetic per-domain link load series and CSV io."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class TrafficMatrix:
    """Per-path load series (Mbps, 1 s resolution) recorded by one Near-RT RIC domain."""

    series: np.ndarray  # (n_paths, n_seconds)
    domain: int = 0
    path_ids: tuple = ()
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        self.series = np.atleast_2d(np.asarray(self.series, dtype=float))
        if np.any(self.series < 0):
            raise ValueError("traffic loads must be non-negative")
        if not self.path_ids:
            self.path_ids = tuple(str(k) for k in range(self.series.shape[0]))
        if self.lo is None:
            self.lo = float(self.series.min())
        if self.hi is None:
            self.hi = float(self.series.max())

    @property
    def length(self) -> int:
        return self.series.shape[1]

    @property
    def bounds(self) -> tuple[float, float]:
        return self.lo, self.hi

    def normalized(self) -> np.ndarray:
        return normalize(self.series, self.lo, self.hi)


def normalize(x, lo, hi):
    span = hi - lo if hi > lo else 1.0
    return (np.asarray(x, dtype=float) - lo) / span


def denormalize(x, lo, hi):
    span = hi - lo if hi > lo else 1.0
    return np.asarray(x, dtype=float) * span + lo


def synth_domain_traffic(capacity, n_domains, seconds, rng, util_range=(0.5, 0.85),
                         amplitude=(0.2, 0.4), period=(300.0, 900.0), slow_noise=0.03,
                         fast_noise=0.08, start=0) -> np.ndarray:
    """Background load per (domain, link, second) in Mbps.

    Each domain carries a share of every link's mean utilization. A domain's
    component is a slow sinusoid plus AR(1) drift plus per-second jitter.
    """
    capacity = np.asarray(capacity, dtype=float)
    n_links = capacity.size
    util = rng.uniform(*util_range, size=n_links)
    shares = rng.dirichlet(np.ones(n_domains), size=n_links).T  # (domains, links)
    mean = shares * (util * capacity)[None, :]
    amp = rng.uniform(*amplitude, size=n_domains)[:, None]
    per = rng.uniform(*period, size=n_domains)[:, None]
    phase = rng.uniform(0, 2 * np.pi, size=(n_domains, n_links))
    t = np.arange(start, start + seconds, dtype=float)
    wave = 1.0 + amp[..., None] * np.sin(2 * np.pi * t[None, None, :] / per[..., None] + phase[..., None])
    rho = 0.95
    eps = rng.normal(0.0, slow_noise * np.sqrt(1 - rho * rho), size=(n_domains, n_links, seconds))
    drift = np.empty_like(eps)
    acc = rng.normal(0.0, slow_noise, size=(n_domains, n_links))
    for k in range(seconds):
        acc = rho * acc + eps[..., k]
        drift[..., k] = acc
    jitter = rng.normal(0.0, fast_noise, size=(n_domains, n_links, seconds))
    out = mean[..., None] * (wave + drift + jitter)
    return np.maximum(out, 0.0)


def write_traffic_csv(path, matrix: TrafficMatrix) -> None:
    """Rows of (t_seconds, path_id, mbps)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_seconds", "path_id", "mbps"])
        for t in range(matrix.length):
            for pid, row in zip(matrix.path_ids, matrix.series):
                w.writerow([t, pid, f"{row[t]:.6f}"])


def read_traffic_csv(path, domain=0) -> TrafficMatrix:
    data: dict[str, dict[int, float]] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            data.setdefault(rec["path_id"], {})[int(rec["t_seconds"])] = float(rec["mbps"])
    ids = list(data)
    n = max(max(v) for v in data.values()) + 1
    series = np.zeros((len(ids), n))
    for k, pid in enumerate(ids):
        for t, v in data[pid].items():
            series[k, t] = v
    return TrafficMatrix(series, domain, tuple(ids))
