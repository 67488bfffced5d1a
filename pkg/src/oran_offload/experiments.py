"""Experiment runners: route comparison, agent comparison, placement delays, forecast-assisted routing."""
from __future__ import annotations

import logging
import multiprocessing as mp
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import env as env_mod
from .agents import make_agent, train
from .env import OffloadEnv, get_infrastructure
from .errors import UnknownExperiment
from .scenario import Scenario, seed_stream

log = logging.getLogger(__name__)

EXPERIMENTS = ("sp_vs_sr", "dql_vs_ql", "placement_delays", "fl_vs_nofl")
VARIANTS = {
    "sp_vs_sr": ("routing",),
    "dql_vs_ql": ("dql", "qlearning"),
    "placement_delays": ("local", "ec", "rc", "auto"),
    "fl_vs_nofl": ("fl", "nofl"),
}
DELAY_KEYS = ("delay", "uplink", "fronthaul", "transfer", "propagation", "compute")


@dataclass
class RunResult:
    """One (experiment, variant, seed) run. Every populated series has one entry per episode."""

    experiment: str
    variant: str
    seed: int
    rewards: np.ndarray | None
    delays: dict  # name -> per-episode series
    route_log: list  # (episode, offloaded tasks, tasks sent over an SR path)
    seconds: float
    train_log: list = field(default_factory=list)
    table: list = field(default_factory=list)  # per-pair summary rows (route comparison only)
    constraint_checks: dict = field(default_factory=dict)  # training-run audit, when requested

    @property
    def episodes(self) -> int:
        for v in self.delays.values():
            return len(v)
        return 0 if self.rewards is None else len(self.rewards)


def _route_comparison(sc: Scenario, seed) -> RunResult:
    t0 = time.perf_counter()
    infra = get_infrastructure(sc)
    pl = infra.planner
    n = int(sc.rl["episodes"])
    rng = seed_stream(seed, "episodes")
    seconds = rng.integers(0, infra.seconds, size=n)
    demand = rng.uniform(*sc.bits_range, size=n)
    P = len(pl.pairs)
    sp = np.empty((n, P))
    sr = np.full((n, P), np.inf)
    sel = np.empty((n, P))
    eta = np.empty((n, P), dtype=int)
    for k in range(n):
        loads = infra.loads[:, seconds[k]]
        rows, eta[k] = pl.choose(loads)
        sp[k] = pl.delays(pl.sp_row, demand[k], loads)
        sel[k] = pl.delays(rows, demand[k], loads)
        bn = pl.bottlenecks(loads)
        for p, cand in enumerate(pl.sr_rows):
            if len(cand):
                sr[k, p] = demand[k] / bn[cand].max()
    table = []
    for p, (m, e) in enumerate(pl.pairs):
        table.append((seed, m, e, float(sp[:, p].mean()), float(sr[:, p].mean()),
                      float(sel[:, p].mean()), float(eta[:, p].mean())))
    delays = {"sp": sp.mean(axis=1), "sr": sr.mean(axis=1), "selected": sel.mean(axis=1)}
    route_log = [(k, P, int(eta[k].sum())) for k in range(n)]
    return RunResult("sp_vs_sr", "routing", seed, None, delays, route_log,
                     time.perf_counter() - t0, table=table)


def _agent_run(sc: Scenario, experiment, variant, seed, kind, routing_info=None, audit=False) -> RunResult:
    env = OffloadEnv(sc, routing_info=routing_info)
    res = train(env, make_agent(kind, sc.rl, seed), int(sc.rl["episodes"]), seed, sc.rl,
                check_constraints=audit)
    d = np.array([row[1:] for row in res.delay_log], dtype=float).reshape(-1, 3)
    delays = {"local": d[:, 0], "offload": d[:, 1], "fronthaul": d[:, 2]}
    return RunResult(experiment, variant, seed, res.rewards, delays, res.route_log, res.seconds,
                     train_log=res.log, constraint_checks=res.constraint_checks if audit else {})


def rollout_placement(sc: Scenario, placement, seed, episodes=None) -> RunResult:
    """Every device that may offload does so, with the placement mode fixed.

    ``local`` keeps the same tasks on their devices. Delays are averaged over
    the offload-eligible tasks so that all variants cover the same task set.
    """
    t0 = time.perf_counter()
    env = OffloadEnv(sc, placement=placement)
    episodes = int(sc.eval_episodes if episodes is None else episodes)
    rewards = np.empty(episodes)
    series = {k: np.full(episodes, np.nan) for k in DELAY_KEYS}
    route_log = []
    for ep in range(episodes):
        env.reset(seed, ep)
        total, n_sr, n_off = 0.0, 0, 0
        sums = dict.fromkeys(DELAY_KEYS, 0.0)
        count = 0
        while not env.done:
            eligible = env.valid_mask()[:, 1]
            _, r, _, info = env.step(eligible.astype(int), return_state=False)
            total += r
            n_sr += info["n_sr"]
            n_off += int(info["action"].x.sum())
            count += int(eligible.sum())
            for k in DELAY_KEYS:
                sums[k] += float(info[k][eligible].sum())
        rewards[ep] = total
        if count:
            for k in DELAY_KEYS:
                series[k][ep] = sums[k] / count
        route_log.append((ep, n_off, n_sr))
    return RunResult("placement_delays", placement, seed, rewards, series, route_log,
                     time.perf_counter() - t0)


def _job(spec) -> RunResult:
    experiment, variant, seed, sc, audit = spec
    if experiment == "sp_vs_sr":
        return _route_comparison(sc, seed)
    if experiment == "dql_vs_ql":
        return _agent_run(sc, experiment, variant, seed, variant, audit=audit)
    if experiment == "placement_delays":
        return rollout_placement(sc, variant, seed)
    if experiment == "fl_vs_nofl":
        info = "forecast" if variant == "fl" else "raw"
        return _agent_run(sc, experiment, variant, seed, "dql", routing_info=info, audit=audit)
    raise UnknownExperiment(experiment)


def _install_cache(cache):
    env_mod._INFRA_CACHE.update(cache)


def plan_jobs(name, sc: Scenario, seeds, audit=False) -> list:
    names = EXPERIMENTS if name == "all" else (name,)
    for n in names:
        if n not in VARIANTS:
            raise UnknownExperiment(f"unknown experiment {n!r}; choose from {', '.join(EXPERIMENTS)} or all")
    return [(n, v, int(s), sc, audit) for n in names for v in VARIANTS[n] for s in seeds]


def run_experiment(name, scenario: Scenario, seeds, workers=None, check_constraints=False) -> list[RunResult]:
    """Run every (variant, seed) of ``name`` and return results in a fixed order.

    Runs are independent, so they go to a process pool; ``workers=1`` stays in
    process. The scenario infrastructure (including the trained forecaster) is
    built once up front and shared with the workers. ``check_constraints``
    audits every frame of the training runs.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    jobs = plan_jobs(name, scenario, seeds, check_constraints)
    infra = get_infrastructure(scenario)
    if any(j[0] != "sp_vs_sr" for j in jobs):
        infra.routes(scenario.routing_info)
        if any(j[0] == "fl_vs_nofl" for j in jobs):
            infra.routes("forecast")
            infra.routes("raw")
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(int(workers), len(jobs)))
    if workers == 1:
        return [_job(j) for j in jobs]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_install_cache,
                             initargs=(dict(env_mod._INFRA_CACHE),)) as pool:
        return list(pool.map(_job, jobs))


def summarize(results: list[RunResult]) -> dict:
    """Per (experiment, variant): mean and stddev over seeds of each series' run mean."""
    groups: dict = {}
    for r in results:
        g = groups.setdefault((r.experiment, r.variant), {})
        if r.rewards is not None:
            g.setdefault("reward", []).append(float(np.mean(r.rewards)))
            tail = max(1, len(r.rewards) // 10)
            g.setdefault("final_reward", []).append(float(np.mean(r.rewards[-tail:])))
        for k, v in r.delays.items():
            g.setdefault(k, []).append(float(np.nanmean(v)) if np.isfinite(v).any() else float("nan"))
    out = {}
    for key, g in groups.items():
        out[key] = {k: (float(np.mean(v)), float(np.std(v))) for k, v in g.items()}
    return out
