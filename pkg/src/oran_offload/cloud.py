"""Edge/regional cloud computation: proportional shares, admission, redirection, delay assembly."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import EmptyCohort, NoPlacement, ZeroAllocation, ZeroCapacity

FIBER_SPEED = 2e8  # m/s


@dataclass
class CloudNode:
    id: int
    capacity: float  # cycles/s
    reserve_threshold: float = 0.0
    attached_devices: list = field(default_factory=list)
    link_to_peer: dict = field(default_factory=dict)  # peer id -> bits/s
    link_to_rc: float = 0.0
    distance_to_peer: dict = field(default_factory=dict)  # peer id -> m
    distance_to_rc: float = 0.0


@dataclass(frozen=True)
class PlacementDecision:
    y: int
    to_peer: int
    to_rc: int
    allocated: float = 0.0

    def __post_init__(self):
        if self.y + (1 - self.y) * (self.to_peer + self.to_rc) > 1 or self.y + self.to_peer + self.to_rc > 1:
            raise ValueError("a task is placed at one location at most")


def proportional_share(capacity, workload, cohort_workloads):
    """capacity * z_v / sum(z over the cohort)."""
    total = float(np.sum(cohort_workloads))
    if not total > 0:
        raise EmptyCohort("cohort has no workload to share capacity over")
    out = capacity * np.asarray(workload, dtype=float) / total
    return float(out) if np.ndim(out) == 0 else out


def admit(capacity, share, reserve, mode="semantic"):
    """Admission predicate on the capacity left after granting ``share``.

    ``semantic``: admit while the remainder stays at or above the reserve.
    ``literal``: the inequality as printed in the source model (remainder <= reserve).
    """
    remaining = capacity - np.asarray(share, dtype=float)
    if mode == "semantic":
        out = remaining >= reserve
    elif mode == "literal":
        out = remaining <= reserve
    else:
        raise ValueError(f"unknown admission mode {mode!r}")
    out = out.astype(int)
    return int(out) if out.ndim == 0 else out


def ec_exec_delay(d, workload, share):
    share = np.asarray(share, dtype=float)
    if np.any(share <= 0):
        raise ZeroAllocation("no compute allocated to the task")
    out = np.asarray(d, dtype=float) * np.asarray(workload, dtype=float) / share
    return float(out) if out.ndim == 0 else out


def propagation_delay(length_m, speed=FIBER_SPEED):
    if not speed > 0:
        raise ValueError("propagation speed must be positive")
    out = np.asarray(length_m, dtype=float) / speed
    return float(out) if out.ndim == 0 else out


def redirect_decision(tau_peer, tau_rc, peer_has_resources) -> tuple[int, int]:
    """(to_peer, to_rc) for a task its home EC could not serve."""
    if peer_has_resources and tau_peer <= tau_rc:
        return 1, 0
    return 0, 1


def transfer_delay(redirected_bits, link_capacity) -> float:
    if not link_capacity > 0:
        raise ZeroCapacity("inter-cloud link capacity must be positive")
    return float(np.sum(redirected_bits)) / link_capacity


def total_offload_delay(y, to_peer, to_rc, uplink, fronthaul, ec_compute=0.0,
                        peer_transfer=0.0, peer_propagation=0.0, peer_compute=0.0,
                        rc_transfer=0.0, rc_propagation=0.0, rc_compute=0.0, offloaded=1):
    """Offloading plus computation latency for one placement."""
    if offloaded and y + to_peer + to_rc == 0:
        raise NoPlacement("offloaded task has no compute location")
    at_ec = uplink + fronthaul + ec_compute
    at_peer = uplink + fronthaul + peer_transfer + peer_propagation + peer_compute
    at_rc = uplink + fronthaul + rc_transfer + rc_propagation + rc_compute
    return y * at_ec + (1 - y) * (to_peer * at_peer + to_rc * at_rc)


def exclusivity_check(x, y, to_peer, to_rc) -> bool:
    """True when the task runs at exactly one of: device, home EC, a peer EC, the RC."""
    if x == 0:
        return y == 0 and to_peer == 0 and to_rc == 0
    support = to_peer + to_rc
    if y == 1 and support:
        return False
    return (1 - x) + x * (y + support) == 1


@dataclass
class Placement:
    """Per-task outcome of the cloud stage, arrays aligned with the offloaded tasks."""

    location: np.ndarray  # EC index, or n_ecs for the RC
    y: np.ndarray
    to_peer: np.ndarray
    to_rc: np.ndarray
    share: np.ndarray
    compute: np.ndarray
    transfer: np.ndarray
    propagation: np.ndarray
    allocated: np.ndarray  # cycles/s granted per EC


@njit(cache=True)
def _admission_ok(capacity, reserve, zmin, zmax, total, semantic):
    """Admission of every member of a cohort, from its extreme workloads only."""
    if semantic:
        # the largest share leaves the least capacity behind
        return capacity - capacity * zmax / total >= reserve
    return capacity - capacity * zmin / total <= reserve


@njit(cache=True)
def _auto_locations(home, workload, cycles, deadline, ec_cpu, reserve, prop_peer, prop_rc, semantic):
    """Shed-and-redirect placement; returns an EC index or n_ecs (RC) per task.

    Task i meets its deadline under proportional sharing iff the cohort's total
    workload Z satisfies Z <= deadline_i * capacity * z_i / cycles_i, so a cohort
    is tracked by its total, the tightest such bound and its extreme workloads.
    """
    k = home.size
    n_ec = ec_cpu.size
    loc = np.full(k, -1, np.int64)
    total = np.zeros(n_ec)
    bound = np.full(n_ec, np.inf)
    zmin = np.full(n_ec, np.inf)
    zmax = np.zeros(n_ec)
    shed = np.zeros(k, np.bool_)
    for n in range(n_ec):
        members = np.flatnonzero(home == n)[::-1].copy()
        if members.size == 0:
            continue
        # deadline ascending, index descending: the reverse of the leaving order
        grp = members[np.argsort(deadline[members], kind="mergesort")]
        Z, B, lo, hi = 0.0, np.inf, np.inf, 0.0
        n_keep = 0
        for j in range(grp.size):
            v = grp[j]
            Z += workload[v]
            B = min(B, deadline[v] * ec_cpu[n] * workload[v] / cycles[v])
            lo = min(lo, workload[v])
            hi = max(hi, workload[v])
            if Z <= B and _admission_ok(ec_cpu[n], reserve[n], lo, hi, Z, semantic):
                n_keep = j + 1
                total[n], bound[n], zmin[n], zmax[n] = Z, B, lo, hi
        for j in range(grp.size):
            if j < n_keep:
                loc[grp[j]] = n
            else:
                shed[grp[j]] = True
    if not shed.any():
        return loc
    zlow = workload.min()
    for n in range(n_ec):
        peers = np.empty(n_ec - 1, np.int64)
        m = 0
        for q in np.argsort(prop_peer[n], kind="mergesort"):
            if q != n and prop_peer[n, q] <= prop_rc[n]:
                peers[m] = q
                m += 1
        for v in range(k):
            if not shed[v] or home[v] != n:
                continue
            target = n_ec
            for j in range(m):
                q = peers[j]
                if total[q] + zlow > bound[q]:
                    continue  # full for any task
                b_q = deadline[v] * ec_cpu[q] * workload[v] / cycles[v]
                t_new = total[q] + workload[v]
                if t_new > min(bound[q], b_q):
                    continue
                if not _admission_ok(ec_cpu[q], reserve[q], min(zmin[q], workload[v]),
                                     max(zmax[q], workload[v]), t_new, semantic):
                    continue
                total[q] = t_new
                bound[q] = min(bound[q], b_q)
                zmin[q] = min(zmin[q], workload[v])
                zmax[q] = max(zmax[q], workload[v])
                target = q
                break
            loc[v] = target
    return loc


def link_matrices(peer_links, rc_links, prop_peer, prop_rc):
    """(n_ecs, n_ecs + 1) capacity and propagation tables; the last column is the RC."""
    links = np.column_stack([np.asarray(peer_links, dtype=float), np.asarray(rc_links, dtype=float)])
    props = np.column_stack([np.asarray(prop_peer, dtype=float), np.asarray(prop_rc, dtype=float)])
    return links, props


def redirect_delays(home, loc, bits, links, props):
    """Transfer and propagation delay per task run away from its home EC.

    All bits moved over the same inter-cloud link share it, so each task waits
    for its group's total. ``loc == n_ecs`` is the regional cloud; ``links``
    and ``props`` come from ``link_matrices``.
    """
    home = np.asarray(home, dtype=int)
    loc = np.asarray(loc, dtype=int)
    bits = np.asarray(bits, dtype=float)
    n_ec = links.shape[0]
    transfer = np.zeros(len(home))
    propagation = np.zeros(len(home))
    away = (loc != home) & (loc >= 0)
    if away.any():
        h, l = home[away], loc[away]
        key = h * (n_ec + 1) + l
        group = np.bincount(key, weights=bits[away], minlength=n_ec * (n_ec + 1))
        lk = links[h, l]
        if np.any(lk <= 0):
            raise ZeroCapacity("inter-cloud link capacity must be positive")
        transfer[away] = group[key] / lk
        propagation[away] = props[h, l]
    return transfer, propagation


def auto_locations(home, bits, workload, deadline, ec_cpu, reserve, prop_peer, prop_rc,
                   admission="semantic") -> np.ndarray:
    """Location of each offloaded task under shed-and-redirect (n_ecs = RC)."""
    if admission not in ("semantic", "literal"):
        raise ValueError(f"unknown admission mode {admission!r}")
    home = np.asarray(home, dtype=np.int64)
    workload = np.asarray(workload, dtype=float)
    bits = np.asarray(bits, dtype=float)
    if home.size == 0:
        return np.zeros(0, dtype=np.int64)
    return _auto_locations(home, workload, bits * workload, np.asarray(deadline, dtype=float),
                           np.asarray(ec_cpu, dtype=float), np.asarray(reserve, dtype=float),
                           np.asarray(prop_peer, dtype=float), np.asarray(prop_rc, dtype=float),
                           admission == "semantic")


def node_shares(loc, workload, ec_cpu, rc_cpu):
    """Proportional compute share of each task over its node's final cohort."""
    loc = np.asarray(loc, dtype=int)
    workload = np.asarray(workload, dtype=float)
    caps = np.append(np.asarray(ec_cpu, dtype=float), rc_cpu)
    Z = np.bincount(loc, weights=workload, minlength=len(caps))
    return caps[loc] * workload / Z[loc]


def resolve_placement(home, bits, workload, deadline, ec_cpu, rc_cpu, reserve, prop_peer,
                      prop_rc, peer_links, rc_links, admission="semantic", forced=None) -> Placement:
    """Decide where each offloaded task runs and assemble its cloud-side delays.

    Auto mode: every EC keeps the largest prefix of its cohort that it can admit
    within deadlines, shedding the loosest-deadline tasks first; shed tasks go to
    the nearest peer that can still take them when it beats the RC on
    propagation, otherwise to the RC. ``forced`` gives explicit locations.
    """
    home = np.asarray(home, dtype=int)
    bits = np.asarray(bits, dtype=float)
    workload = np.asarray(workload, dtype=float)
    deadline = np.asarray(deadline, dtype=float)
    n_ec = len(ec_cpu)
    k = len(home)
    if forced is not None:
        loc = np.broadcast_to(np.asarray(forced, dtype=int), (k,)).copy()
    else:
        loc = auto_locations(home, bits, workload, deadline, ec_cpu, reserve, prop_peer, prop_rc,
                             admission).astype(int)
    if np.any((loc < 0) | (loc > n_ec)):
        raise NoPlacement("offloaded task without a valid location")
    y = (loc == home).astype(int)
    to_rc = (loc == n_ec).astype(int)
    to_peer = ((loc != home) & (loc != n_ec)).astype(int)
    share = node_shares(loc, workload, ec_cpu, rc_cpu)
    on_ec = loc < n_ec
    allocated = np.bincount(loc[on_ec], weights=share[on_ec], minlength=n_ec)
    compute = bits * workload / share
    links, props = link_matrices(peer_links, rc_links, prop_peer, prop_rc)
    transfer, propagation = redirect_delays(home, loc, bits, links, props)
    return Placement(loc, y, to_peer, to_rc, share, compute, transfer, propagation, allocated)
