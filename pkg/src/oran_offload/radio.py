"""Wireless uplink between edge devices and O-RUs (orthogonal spectrum, no interference)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidNoise, ZeroRateWithOffload


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    tx_power_dbm: float
    channel_gain_sq: float
    noise_power: float
    bandwidth: float
    fraction: float = 1.0

    def __post_init__(self):
        if not self.noise_power > 0:
            raise InvalidNoise("noise power must be positive")
        if self.channel_gain_sq < 0:
            raise ValueError("channel gain must be non-negative")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("bandwidth fraction must lie in [0, 1]")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def snr(self) -> float:
        return float(dbm_to_watts(self.tx_power_dbm)) * self.channel_gain_sq / self.noise_power


def snr_spectral_efficiency(snr):
    """log2(1 + SNR), elementwise."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("SNR must be non-negative")
    out = np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def spectral_efficiency(p: RadioParams) -> float:
    return snr_spectral_efficiency(p.snr)


def instantaneous_rate(x, b, bandwidth, gamma):
    """Uplink rate x * b * bandwidth * gamma in bits/s."""
    b = np.asarray(b, dtype=float)
    if np.any((b < 0) | (b > 1)):
        raise ValueError("bandwidth fraction must lie in [0, 1]")
    out = np.asarray(x) * b * np.asarray(bandwidth, dtype=float) * np.asarray(gamma, dtype=float)
    return float(out) if out.ndim == 0 else out


def uplink_delay(d, rate, x=1):
    """Seconds to upload d bits at ``rate``; zero when the task is not offloaded."""
    d = np.asarray(d, dtype=float)
    rate = np.asarray(rate, dtype=float)
    x = np.broadcast_to(np.asarray(x), np.broadcast(d, rate).shape)
    if np.any((x == 1) & (rate <= 0)):
        raise ZeroRateWithOffload("offloading device has zero uplink rate")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x == 1, d / np.where(rate > 0, rate, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def bandwidth_budget_ok(fractions, offload_flags) -> tuple[bool, float]:
    """Per-O-RU spectrum budget: sum of x * b must not exceed 1."""
    used = float(np.sum(np.asarray(offload_flags) * np.asarray(fractions, dtype=float)))
    slack = 1.0 - used
    return slack >= -1e-12, slack


def equal_split(offload_flags, groups, n_groups) -> np.ndarray:
    """Bandwidth fractions shared equally among the offloaders of each O-RU."""
    x = np.asarray(offload_flags, dtype=float)
    counts = np.bincount(groups, weights=x, minlength=n_groups)
    with np.errstate(divide="ignore"):
        share = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    return x * share[groups]
