"""Edge-device tasks, local execution delay and device status."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentDecision


@dataclass(frozen=True)
class Task:
    input_bits: float
    deadline: float
    workload: float  # CPU cycles per bit
    owner: int = 0

    def __post_init__(self):
        if not (self.input_bits > 0 and self.deadline > 0 and self.workload > 0):
            raise ValueError("task size, deadline and workload must be positive")


@dataclass
class DeviceState:
    cpu: float
    status: int = 1
    hold_time: float = 0.0
    offload_flag: int = 0
    attached_oru: int = 0


def local_exec_delay(d, workload, cpu):
    """d * workload / cpu seconds."""
    cpu = np.asarray(cpu, dtype=float)
    if np.any(cpu <= 0):
        raise ValueError("device CPU must be positive")
    out = np.asarray(d, dtype=float) * np.asarray(workload, dtype=float) / cpu
    return float(out) if out.ndim == 0 else out


def device_status(d, deadline, workload, cpu):
    """1 when the device can run the task itself before its deadline, else 0."""
    tau = np.asarray(local_exec_delay(d, workload, cpu))
    unable = (tau > np.asarray(deadline)) | (np.asarray(workload) > np.asarray(cpu))
    out = np.where(unable, 0, 1)
    return int(out) if out.ndim == 0 else out


def local_total_delay(mu, x, tau, hold):
    """Piecewise local delay; an able device (mu=1) that offloads is rejected."""
    mu, x = np.asarray(mu), np.asarray(x)
    if np.any((mu == 1) & (x == 1)):
        raise InconsistentDecision("device able to compute locally (mu=1) must not offload")
    tau = np.asarray(tau, dtype=float)
    out = np.where(x == 1, 0.0, np.where(mu == 1, tau, tau + np.asarray(hold, dtype=float)))
    return float(out) if out.ndim == 0 else out
