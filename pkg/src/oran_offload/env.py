"""Joint offloading / routing / placement MDP over one episode of frames."""
from __future__ import annotations

import copy
import os
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import cloud
from .device import device_status, local_exec_delay, local_total_delay
from .errors import BadScenario, InconsistentDecision, InvalidAction, ShapeMismatch
from .forecast import FederatedForecaster, forecast_series
from .nn import load_params, save_params
from .radio import dbm_to_watts, equal_split, snr_spectral_efficiency
from .scenario import Scenario, seed_stream
from .topology import MBPS, MIN_RESIDUAL_FRACTION, RoutePlanner, build_topology, cube_spec
from .traffic import synth_domain_traffic

LOCAL = -1
N_FEATURES = 11
PLACEMENTS = ("auto", "ec", "rc", "local")


@dataclass(frozen=True)
class PenaltyWeights:
    cod: float = 0.5
    wireless: float = 1e-7
    fronthaul: float = 1e-4
    compute: float = 1e-10

    def __post_init__(self):
        if min(self.cod, self.wireless, self.fronthaul, self.compute) < 0:
            raise ValueError("penalty weights must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.cod, self.wireless, self.fronthaul, self.compute])


@dataclass
class EnvState:
    """Observable state of one frame: (tau_loc, tau_off, omega, l, chi, t)."""

    tau_loc: np.ndarray
    tau_off: np.ndarray
    bandwidth: np.ndarray  # Hz per O-RU
    used_fraction: np.ndarray  # per O-RU, previous frame
    loads: np.ndarray  # Mbps per fronthaul link, current second
    compute: np.ndarray  # cycles/s available per EC
    t: int

    def arrays(self):
        return (self.tau_loc, self.tau_off, self.bandwidth, self.used_fraction, self.loads, self.compute)


@dataclass
class Action:
    """Factored decision for one frame.

    ``location`` is LOCAL, an EC index, or n_ecs for the regional cloud;
    ``share`` is the compute rate granted at that location.
    """

    x: np.ndarray
    b: np.ndarray
    eta: np.ndarray  # SR flag per (O-RU, EC) pair
    rows: np.ndarray  # selected planner path row per pair
    location: np.ndarray
    y: np.ndarray
    to_peer: np.ndarray
    to_rc: np.ndarray
    share: np.ndarray


# -- pure constraint / reward pieces ------------------------------------------

def wireless_slack(x, b, oru, n_orus) -> np.ndarray:
    """1 - sum x*b per O-RU."""
    used = np.bincount(np.asarray(oru, dtype=int), weights=np.asarray(x) * np.asarray(b, dtype=float),
                       minlength=n_orus)
    return 1.0 - used


def fronthaul_slack(capacity, background, offload) -> np.ndarray:
    """Per-link Mbps left after background and offloaded traffic."""
    return np.asarray(capacity, dtype=float) - np.asarray(background, dtype=float) - np.asarray(offload, dtype=float)


def compute_slack(capacity, location, share, x=None) -> np.ndarray:
    """Per-EC cycles/s left after the tasks placed there."""
    capacity = np.asarray(capacity, dtype=float)
    location = np.asarray(location, dtype=int)
    share = np.asarray(share, dtype=float)
    if x is not None:
        share = share * np.asarray(x)
    on_ec = (location >= 0) & (location < len(capacity))
    used = np.bincount(location[on_ec], weights=share[on_ec], minlength=len(capacity))
    return capacity - used


def reward_terms(deadline, delay, ws, fs, cs) -> np.ndarray:
    """(CoD deadline-slack sum, wireless, fronthaul, compute slack sums)."""
    return np.array([
        float(np.sum(np.asarray(deadline) - np.asarray(delay))),
        float(np.sum(ws)), float(np.sum(fs)), float(np.sum(cs)),
    ])


def reward(terms, weights: PenaltyWeights) -> float:
    return float(weights.as_array() @ np.asarray(terms, dtype=float))


def repaired_terms(ws, fs, cs, cod_term) -> np.ndarray:
    """Counterfactual terms with every violated constraint brought back to zero slack."""
    return np.array([cod_term, np.maximum(ws, 0).sum(), np.maximum(fs, 0).sum(), np.maximum(cs, 0).sum()])


@njit(cache=True)
def _evaluate_frame(x, b, loc, share, rows, mu, loc_delay, d, dev_bw, gamma, pair, home, oru, bn,
                    info_latency, workload, links, props, mask, cap, loads, ec_cpu, n_orus, unit):
    """Per-device delays and per-entity slacks of one frame.

    Status code: 0 ok, 1 able device offloads, 2 no uplink rate, 3 no compute share.
    """
    V = x.size
    n_ec = ec_cpu.size
    n_rows, n_links = mask.shape
    tau_loc = np.zeros(V)
    uplink = np.zeros(V)
    fronthaul = np.zeros(V)
    xfer = np.zeros(V)
    prop = np.zeros(V)
    compute = np.zeros(V)
    tau_off = np.zeros(V)
    delay = np.zeros(V)
    used = np.zeros(n_orus)
    group = np.zeros((n_ec, n_ec + 1))
    row_bits = np.zeros(n_rows)
    alloc = np.zeros(n_ec)
    status = 0
    for v in range(V):
        used[oru[v]] += x[v] * b[v]
        if x[v] == 0:
            tau_loc[v] = loc_delay[v]
            delay[v] = loc_delay[v]
            continue
        if mu[v] == 1:
            status = 1
        rate = b[v] * dev_bw[v] * gamma[v]
        if rate <= 0.0:
            status = 2
            continue
        if share[v] <= 0.0:
            status = 3
            continue
        uplink[v] = d[v] / rate
        r = rows[pair[v]]
        fronthaul[v] = d[v] / bn[r] + info_latency
        row_bits[r] += d[v]
        compute[v] = d[v] * workload / share[v]
        if loc[v] != home[v]:
            group[home[v], loc[v]] += d[v]
        if loc[v] < n_ec:
            alloc[loc[v]] += share[v]
    for v in range(V):
        if x[v] == 1 and status == 0:
            if loc[v] != home[v]:
                xfer[v] = group[home[v], loc[v]] / links[home[v], loc[v]]
                prop[v] = props[home[v], loc[v]]
            tau_off[v] = uplink[v] + fronthaul[v] + xfer[v] + prop[v] + compute[v]
            delay[v] = tau_off[v]
    ws = 1.0 - used
    for m in range(n_orus):
        if abs(ws[m]) <= 1e-12:
            ws[m] = 0.0
    fs = np.empty(n_links)
    active = np.zeros(n_links, np.bool_)
    for k in range(n_links):
        off = 0.0
        for r in range(n_rows):
            if mask[r, k]:
                off += row_bits[r]
        fs[k] = cap[k] - loads[k] - off / unit
    for p in range(rows.size):
        for k in range(n_links):
            if mask[rows[p], k]:
                active[k] = True
    cs = ec_cpu - alloc
    for n in range(n_ec):
        # proportional shares of a full cohort sum to the capacity up to rounding
        if abs(cs[n]) <= 1e-9 * ec_cpu[n]:
            cs[n] = 0.0
    return status, tau_loc, uplink, fronthaul, xfer, prop, compute, tau_off, delay, ws, fs, active, cs


# -- per-scenario infrastructure ---------------------------------------------------

class Infrastructure:
    """Everything fixed by the scenario: topology, clouds, traffic trace, routes, forecaster."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        rng = seed_stream(sc.instance_seed, "infra")
        spec = sc.topology if sc.topology is not None else cube_spec(sc.fronthaul_capacity, rng)
        self.graph = build_topology(spec)
        if len(self.graph.ingress_map) < sc.n_orus or len(self.graph.egress_map) < sc.n_ecs:
            raise BadScenario("topology lacks ingress/egress nodes for the O-RUs and ECs")
        self.n_ecs = sc.n_ecs
        self.ec_cpu = rng.uniform(*sc.ec_cpu_range, size=sc.n_ecs)
        self.rc_cpu = float(rng.uniform(*sc.rc_cpu_range))
        n = sc.n_ecs
        peer = rng.uniform(*sc.ec_link_capacity, size=(n, n))
        self.peer_links = np.triu(peer, 1) + np.triu(peer, 1).T  # Mbps
        self.rc_links = rng.uniform(*sc.rc_link_capacity, size=n)
        dist = rng.uniform(*sc.peer_distance_range, size=(n, n))
        self.peer_distance = np.triu(dist, 1) + np.triu(dist, 1).T
        self.rc_distance = rng.uniform(*sc.rc_distance_range, size=n)
        self.prop_peer = cloud.propagation_delay(self.peer_distance)
        self.prop_rc = cloud.propagation_delay(self.rc_distance)
        self.reserve = np.full(n, sc.reserve)
        self.links, self.props = cloud.link_matrices(self.peer_links * MBPS, self.rc_links * MBPS,
                                                     self.prop_peer, self.prop_rc)

        self.planner = RoutePlanner(self.graph, sc.routing_mode)
        self.cap = self.graph.capacity_array()
        tr = sc.traffic
        seconds = int(tr["seconds"])
        full = synth_domain_traffic(
            self.cap, n, 2 * seconds, seed_stream(sc.instance_seed, "traffic"),
            util_range=tuple(tr["util_range"]), amplitude=tuple(tr["amplitude"]),
            period=tuple(tr["period"]), slow_noise=tr["slow_noise"], fast_noise=tr["fast_noise"])
        self.history = full[:, :, :seconds]  # recorded before the simulation; FL training data
        self.live = full[:, :, seconds:]  # (domains, links, seconds) seen during episodes
        self.seconds = seconds
        self.loads = self.live.sum(axis=0)  # (links, seconds)
        resid = np.maximum(self.cap[:, None] - self.loads, MIN_RESIDUAL_FRACTION * self.cap[:, None])
        self.bn_true = np.stack([resid[m].min(axis=0) for m in self.planner.mask]) * MBPS  # (rows, s)
        self.lookback = int(sc.fl["lookback"])
        # default cost of shipping one domain-by-link-by-second matrix over an average EC-RC link
        bits = n * len(self.cap) * seconds * sc.matrix_bits_per_sample
        self.matrix_delay = bits / (float(np.mean(self.rc_links)) * MBPS)
        self._routes = {}
        self.forecaster = None
        self.forecast_loads = None

    def fit_forecaster(self):
        if self.forecaster is not None:
            return self.forecaster
        fl = self.sc.fl
        f = FederatedForecaster(arch=fl["arch"], hidden=fl["hidden"], lookback=fl["lookback"],
                                rounds=fl["rounds"], alpha=fl["alpha"], client_lr=fl["client_lr"],
                                tol=fl["tol"], window_stride=fl["window_stride"],
                                max_windows=fl["max_windows"],
                                random_state=int(seed_stream(self.sc.instance_seed, "fl").integers(2**31)))
        ckpt = fl.get("checkpoint")
        clients = [self.history[d] for d in range(self.n_ecs)]
        if ckpt and os.path.exists(ckpt):
            f.fit_bounds_only(clients)
            f.params_ = load_params(ckpt)
        else:
            f.fit(clients)
            if ckpt:
                save_params(f.params_, ckpt)
        self.forecaster = f
        return f

    def forecasts(self) -> np.ndarray:
        """Forecast per-link total load (links, seconds), NaN before one lookback of history."""
        if self.forecast_loads is None:
            f = self.fit_forecaster()
            per_domain = [forecast_series(f.params_, self.live[d], f.domain_bounds(d), self.lookback)
                          for d in range(self.n_ecs)]
            self.forecast_loads = np.sum(per_domain, axis=0)
        return self.forecast_loads

    def routes(self, info: str):
        """Selected planner rows (seconds, pairs) and SR flags decided on the routing information."""
        if info not in self._routes:
            if info == "forecast":
                est = self.forecasts()
            elif info == "raw":
                est = np.full_like(self.loads, np.nan)
                est[:, self.lookback:] = self.loads[:, self.lookback - 1:-1]
            elif info == "oracle":
                est = self.loads
            else:
                raise BadScenario(f"unknown routing information mode {info!r}")
            rows = np.empty((self.seconds, len(self.planner.pairs)), dtype=int)
            eta = np.zeros_like(rows)
            for s in range(self.seconds):
                sp_only = s < self.lookback or np.isnan(est[0, s])
                rows[s], eta[s] = self.planner.choose(np.nan_to_num(est[:, s]), sp_only=sp_only)
            self._routes[info] = (rows, eta)
        return self._routes[info]


_INFRA_CACHE: dict = {}


def get_infrastructure(sc: Scenario) -> Infrastructure:
    """Shared per-scenario infrastructure (the trained forecaster is reused across seeds)."""
    keys = [k for k in sc.to_dict() if k not in ("rl", "horizon", "routing_info", "weights",
                                                  "n_devices", "admission", "matrix_transfer_delay",
                                                  "eval_episodes")]
    key = sc.digest(keys)
    if key not in _INFRA_CACHE:
        _INFRA_CACHE[key] = Infrastructure(sc)
    return _INFRA_CACHE[key]


# -- environment --------------------------------------------------------------

class OffloadEnv:
    """Episode simulator. One action per frame; ``step`` applies the radio, routing and cloud stages."""

    def __init__(self, scenario: Scenario, placement="auto", routing_info=None, infra=None):
        if placement not in PLACEMENTS:
            raise BadScenario(f"unknown placement mode {placement!r}")
        self.sc = scenario
        self.infra = infra or get_infrastructure(scenario)
        self.placement = placement
        self.routing_info = routing_info or scenario.routing_info
        self.weights = PenaltyWeights(*scenario.weights)
        self.V = scenario.n_devices
        self.H = scenario.horizon
        if self.H > self.infra.seconds:
            raise BadScenario("episode horizon exceeds the traffic trace")
        self.n_orus = scenario.n_orus
        self.n_ecs = scenario.n_ecs
        self.rows, self.eta = self.infra.routes(self.routing_info)
        self._wl = np.full(self.V, scenario.workload)
        self._ar = np.arange(self.V)
        self._issued = None
        self.info_latency = 0.0
        if self.routing_info == "raw":
            override = scenario.matrix_transfer_delay
            self.info_latency = self.infra.matrix_delay if override is None else float(override)
        self.noise = float(dbm_to_watts(scenario.noise_dbm))
        self.power = float(dbm_to_watts(scenario.tx_power_dbm))
        self.t = 0
        self._ep = None
        self._est = None

    # episode randomness is drawn up front so a state snapshot replays exactly
    def reset(self, seed, episode=0) -> EnvState:
        sc = self.sc
        V, H = self.V, self.H
        rt = seed_stream(seed, "tasks", episode)
        rc = seed_stream(seed, "channel", episode)
        re_ = seed_stream(seed, "episodes", episode)
        bits = rt.uniform(*sc.bits_range, size=(H, V))
        deadline = rt.uniform(*sc.deadline_range, size=(H, V))
        hold = rt.uniform(*sc.hold_range, size=(H, V))
        gain_db = rc.uniform(*sc.gain_db_range, size=(H, V))
        bandwidth = rc.uniform(*sc.bandwidth_range, size=self.n_orus)
        oru = re_.integers(0, self.n_orus, size=V)
        home = re_.integers(0, self.n_ecs, size=V)
        offset = int(re_.integers(0, self.infra.seconds - H + 1))
        tau = local_exec_delay(bits, sc.workload, sc.device_cpu)
        mu = device_status(bits, deadline, sc.workload, sc.device_cpu)
        gamma = snr_spectral_efficiency(self.power * 10.0 ** (gain_db / 10.0) / self.noise)
        mu = np.asarray(mu, dtype=int)
        inf, nec = self.infra, self.n_ecs
        cpu = np.append(inf.ec_cpu, inf.rc_cpu)
        cyc_over_cpu = (bits * sc.workload)[:, :, None] / cpu  # (H, V, n_ecs + 1)
        with np.errstate(divide="ignore"):
            xfer = bits[:, :, None] / inf.links[home][None, :, :]  # own bits only
        fixed = xfer + inf.props[home][None, :, :]
        peer_fixed = fixed[:, :, :nec].copy()
        peer_fixed[:, np.arange(V), home] = np.inf
        dmax = sc.deadline_range[1]
        static_obs = np.stack([
            bits / sc.bits_range[1], deadline / dmax, np.minimum(tau / (4.0 * dmax), 1.0),
            mu.astype(float), hold / max(sc.hold_range[1], 1e-12)], axis=-1)
        self._ep = dict(bits=bits, deadline=deadline, hold=hold, gamma=gamma, bandwidth=bandwidth,
                        oru=oru, home=home, offset=offset, tau=tau, mu=mu,
                        loc_delay=np.where(mu == 1, tau, tau + hold),
                        dev_bw=bandwidth[oru], pair=oru * self.n_ecs + home,
                        up_base=bits / (bandwidth[oru] * gamma), cyc_over_cpu=cyc_over_cpu,
                        peer_fixed=peer_fixed, rc_fixed=fixed[:, :, nec], static_obs=static_obs)
        self.t = 0
        self._est = None
        self.prev_oru = np.zeros(self.n_orus)
        self.prev_cohort = np.zeros(self.n_ecs + 1)
        self.prev_used = np.zeros(self.n_orus)
        return self.state()

    def _need(self):
        if self._ep is None:
            raise InvalidAction("environment used before reset")

    @property
    def second(self) -> int:
        return self._ep["offset"] + min(self.t, self.H - 1)

    @property
    def done(self) -> bool:
        return self.t >= self.H

    def pair(self) -> np.ndarray:
        return self._ep["pair"]

    def _estimates(self):
        """Per-device delay estimates for the current frame from the previous frame's load."""
        if self._est is not None and self._est[0] == self.t:
            return self._est[1]
        out = self._compute_estimates()
        self._est = (self.t, out)
        return out

    def _compute_estimates(self):
        e, t, s = self._ep, min(self.t, self.H - 1), self.second
        nec = self.n_ecs
        up = e["up_base"][t] * (self.prev_oru[e["oru"]] + 1.0)
        fh = e["bits"][t] / self.infra.bn_true[self.rows[s][e["pair"]], s] + self.info_latency
        per_node = e["cyc_over_cpu"][t] * (self.prev_cohort + 1.0)  # (V, n_ecs + 1)
        at_home = per_node[self._ar, e["home"]]
        peer = per_node[:, :nec] + e["peer_fixed"][t]
        best_peer = peer.min(axis=1)
        rc = per_node[:, nec] + e["rc_fixed"][t]
        return up, fh, at_home, best_peer, rc

    def state(self) -> EnvState:
        self._need()
        e, t = self._ep, min(self.t, self.H - 1)
        up, fh, at_home, best_peer, rc = self._estimates()
        tau_loc = np.where(e["mu"][t] == 1, e["tau"][t], e["tau"][t] + e["hold"][t])
        tau_off = up + fh + np.minimum(at_home, np.minimum(best_peer, rc))
        alloc = np.zeros(self.n_ecs)
        return EnvState(tau_loc, tau_off, e["bandwidth"].copy(), self.prev_used.copy(),
                        self.infra.loads[:, self.second].copy(), self.infra.ec_cpu - alloc, self.t)

    def observe(self) -> np.ndarray:
        """(V, N_FEATURES) per-device observation, roughly scaled to [0, 1]."""
        self._need()
        sc, e, t = self.sc, self._ep, min(self.t, self.H - 1)
        up, fh, at_home, best_peer, rc = self._estimates()
        out = np.empty((self.V, N_FEATURES))
        out[:, :5] = e["static_obs"][t]
        scale = 1.0 / (4.0 * sc.deadline_range[1])
        for col, v in enumerate((up, fh, at_home, best_peer, rc), start=5):
            np.minimum(v * scale, 1.0, out=out[:, col])
        out[:, 10] = self.t / self.H
        return out

    def valid_mask(self) -> np.ndarray:
        """(V, 2) admissible actions {local, offload}; able devices must stay local."""
        self._need()
        mu = self._ep["mu"][min(self.t, self.H - 1)]
        return np.column_stack([np.ones(self.V, dtype=bool), mu == 0])

    # -- actions ----------------------------------------------------------------
    def decide(self, x, placement=None) -> Action:
        """Complete an offload vector with the environment's sub-policies.

        Bandwidth: equal split per O-RU. Routing: the precomputed choice for the
        current second. Placement: ``placement`` per device if given, else the
        env's placement mode.
        """
        self._need()
        e, t, s = self._ep, self.t, self.second
        x = np.asarray(x)
        if x.shape != (self.V,):
            raise ShapeMismatch(f"offload vector of shape {x.shape}, expected ({self.V},)")
        if not np.all((x == 0) | (x == 1)):
            raise InvalidAction("offload flags must be binary")
        x = x.astype(int)
        if self.placement == "local":
            x = np.zeros(self.V, dtype=int)
        b = equal_split(x, e["oru"], self.n_orus)
        idx = np.flatnonzero(x)
        loc = np.full(self.V, LOCAL, dtype=int)
        share = np.zeros(self.V)
        if len(idx):
            forced = None
            if placement is not None:
                forced = np.asarray(placement, dtype=int)[idx]
            elif self.placement == "ec":
                forced = e["home"][idx]
            elif self.placement == "rc":
                forced = np.full(len(idx), self.n_ecs)
            if forced is None:
                inf = self.infra
                where = cloud.auto_locations(
                    e["home"][idx], e["bits"][t][idx], self._wl[:len(idx)], e["deadline"][t][idx],
                    inf.ec_cpu, inf.reserve, inf.prop_peer, inf.prop_rc, self.sc.admission)
            else:
                where = forced
                if np.any((where < 0) | (where > self.n_ecs)):
                    raise InvalidAction("placement outside the EC/RC range")
            loc[idx] = where
            share[idx] = cloud.node_shares(where, self._wl[:len(idx)], self.infra.ec_cpu, self.infra.rc_cpu)
        home = e["home"]
        y = ((loc == home) & (x == 1)).astype(int)
        to_rc = (loc == self.n_ecs).astype(int)
        to_peer = ((x == 1) & (loc != home) & (loc != self.n_ecs)).astype(int)
        a = Action(x, b, self.eta[s].copy(), self.rows[s].copy(), loc, y, to_peer, to_rc, share)
        self._issued = (self.t, id(a))
        return a

    def validate(self, a: Action):
        e, t = self._ep, self.t
        V = self.V
        for name in ("x", "b", "location", "y", "to_peer", "to_rc", "share"):
            if np.shape(getattr(a, name)) != (V,):
                raise ShapeMismatch(f"action field {name} has the wrong length")
        for name in ("x", "y", "to_peer", "to_rc"):
            v = getattr(a, name)
            if not np.all((v == 0) | (v == 1)):
                raise InvalidAction(f"{name} must be binary")
        if np.any((a.b < 0) | (a.b > 1)):
            raise InvalidAction("bandwidth fractions must lie in [0, 1]")
        if np.any((e["mu"][t] == 1) & (a.x == 1)):
            raise InvalidAction("a device able to compute locally cannot offload")
        placed = a.y + a.to_peer + a.to_rc
        bad = np.flatnonzero(np.where(a.x == 1, placed != 1, placed != 0))
        if len(bad):
            raise InvalidAction(f"device {bad[0]} is not placed at exactly one location")
        off = a.x == 1
        if np.any(off & (a.share <= 0)):
            raise InvalidAction("offloaded task without compute allocation")
        if np.any(off & ((a.location < 0) | (a.location > self.n_ecs))):
            raise InvalidAction("offloaded task without a valid location")

    # -- evaluation -----------------------------------------------------------
    def evaluate(self, a: Action) -> dict:
        """Delays, slacks and reward terms of ``a`` in the current frame (no state change)."""
        e, t, s, inf = self._ep, self.t, self.second, self.infra
        x = np.asarray(a.x, dtype=np.int64)
        (ok, tau_loc, uplink, fronthaul, xfer, prop, compute, tau_off, delay, ws, fs_all, active,
         cs) = _evaluate_frame(
            x, np.asarray(a.b, dtype=float), np.asarray(a.location, dtype=np.int64),
            np.asarray(a.share, dtype=float), np.asarray(a.rows, dtype=np.int64), e["mu"][t],
            e["loc_delay"][t], e["bits"][t], e["dev_bw"], e["gamma"][t], e["pair"], e["home"], e["oru"],
            inf.bn_true[:, s], self.info_latency, self.sc.workload, inf.links, inf.props,
            inf.planner.mask, inf.cap, inf.loads[:, s], inf.ec_cpu, self.n_orus,
            MBPS * self.sc.frame_seconds)
        if ok == 1:
            raise InvalidAction("a device able to compute locally cannot offload")
        if ok == 2:
            raise InvalidAction("offloading device has no uplink bandwidth")
        if ok == 3:
            raise InvalidAction("offloaded task without compute allocation")
        fs = fs_all[active]
        slack = e["deadline"][t] - delay
        terms = np.array([slack.sum(), ws.sum(), fs.sum(), cs.sum()])
        w = self.weights
        r = float(w.as_array() @ terms)
        shared = (w.wireless * terms[1] + w.fronthaul * terms[2] + w.compute * terms[3]) / self.V
        n_off = int(x.sum())
        return dict(
            reward=r, terms=terms, device_reward=w.cod * slack + shared,
            delay=delay, tau_loc=tau_loc, tau_off=tau_off, uplink=uplink, fronthaul=fronthaul,
            transfer=xfer, propagation=prop, compute=compute, wireless_slack=ws,
            fronthaul_slack=fs, fronthaul_slack_all=fs_all, compute_slack=cs,
            repaired=reward(repaired_terms(ws, fs, cs, terms[0]), w),
            n_local=self.V - n_off, n_ec=int(a.y.sum()), n_peer=int(a.to_peer.sum()),
            n_rc=int(a.to_rc.sum()), n_sr=int(a.eta[e["pair"]][x == 1].sum()), second=s,
        )

    def constraint_slacks(self, a: Action):
        info = self.evaluate(a)
        return info["wireless_slack"], info["fronthaul_slack_all"], info["compute_slack"]

    def reward(self, a: Action) -> float:
        return self.evaluate(a)["reward"]

    def step(self, a, return_state=True):
        """Advance one frame. ``a`` is an Action or a binary offload vector."""
        self._need()
        if self.done:
            raise InvalidAction("episode is over; call reset")
        if not isinstance(a, Action):
            x = np.asarray(a)
            if x.shape == (self.V,) and np.any((self._ep["mu"][self.t] == 1) & (x == 1)):
                raise InvalidAction("a device able to compute locally cannot offload")
            a = self.decide(x)
        if self._issued != (self.t, id(a)):
            self.validate(a)
        info = self.evaluate(a)
        info["action"] = a
        e = self._ep
        self.prev_oru = np.bincount(e["oru"], weights=a.x, minlength=self.n_orus).astype(float)
        self.prev_used = 1.0 - info["wireless_slack"]
        self.prev_cohort = np.bincount(a.location[a.x == 1], minlength=self.n_ecs + 1).astype(float)
        self.t += 1
        nxt = self.state() if return_state and not self.done else None
        return nxt, info["reward"], self.done, info

    # -- snapshots ---------------------------------------------------------------
    def get_state(self) -> dict:
        self._need()
        return copy.deepcopy(dict(ep=self._ep, t=self.t, prev_oru=self.prev_oru,
                                  prev_cohort=self.prev_cohort, prev_used=self.prev_used))

    def set_state(self, snap: dict):
        snap = copy.deepcopy(snap)
        self._ep = snap["ep"]
        self.t = snap["t"]
        self.prev_oru = snap["prev_oru"]
        self.prev_cohort = snap["prev_cohort"]
        self.prev_used = snap["prev_used"]
        self._est = None


STEP_LOG_COLUMNS = ("episode", "step", "reward", "cod_term", "wireless_slack", "fronthaul_slack",
                    "compute_slack", "n_local", "n_ec", "n_peer", "n_rc")


def step_log_row(episode, step, info) -> tuple:
    t = info["terms"]
    return (episode, step, info["reward"], t[0], t[1], t[2], t[3],
            info["n_local"], info["n_ec"], info["n_peer"], info["n_rc"])
