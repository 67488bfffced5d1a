"""Independent reference implementations used by the tests.

Each oracle recomputes a quantity by a different route from the package code:
explicit enumeration, explicit loops, or finite differences.
"""
import itertools

import numpy as np

from oran_offload import cloud, radio
from oran_offload.device import local_total_delay
from oran_offload.topology import MBPS, MIN_RESIDUAL_FRACTION


# -- graphs -------------------------------------------------------------------

def enumerate_paths(nodes, edges, i, j):
    """Every simple path from i to j by depth-first search over an edge list."""
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    out = []
    stack = [(i, (i,))]
    while stack:
        node, path = stack.pop()
        if node == j:
            out.append(path)
            continue
        for nb in adj[node]:
            if nb not in path:
                stack.append((nb, path + (nb,)))
    return out


def brute_force_shortest(nodes, weights, i, j):
    """(cost, path) minimizing total weight, ties broken by the smallest node sequence."""
    paths = enumerate_paths(nodes, list(weights), i, j)
    if not paths:
        return None
    def cost(p):
        return sum(weights[(min(a, b), max(a, b))] for a, b in zip(p[:-1], p[1:]))
    best = min(paths, key=lambda p: (round(cost(p), 12), list(p)))
    return cost(best), list(best)


def bottleneck_delay(path, caps, loads, demand_bits):
    """demand / min residual over the path's links; residual floored like the package."""
    if len(path) < 2:
        return 0.0
    resid = []
    for a, b in zip(path[:-1], path[1:]):
        k = (min(a, b), max(a, b))
        c = caps[k]
        resid.append(max(c - loads.get(k, 0.0), MIN_RESIDUAL_FRACTION * c))
    return demand_bits / (min(resid) * MBPS)


# -- placement ---------------------------------------------------------------------

def cohort_ok(members, cap, reserve, workload, cycles, deadline, mode):
    idx = np.array(sorted(members))
    share = cap * workload[idx] / workload[idx].sum()
    ok = cloud.admit(cap, share, reserve, mode).astype(bool) & (cycles[idx] / share <= deadline[idx])
    return bool(ok.all())


def shed_loop(members, cap, reserve, workload, cycles, deadline, mode):
    """Drop the loosest-deadline member (lowest index on ties) until the cohort is feasible."""
    cohort = list(members)
    shed = []
    while cohort:
        if cohort_ok(cohort, cap, reserve, workload, cycles, deadline, mode):
            break
        dl = deadline[np.array(cohort)]
        worst = max(range(len(cohort)), key=lambda k: (dl[k], -cohort[k]))
        shed.append(cohort.pop(worst))
    return sorted(cohort), shed


def placement_oracle(home, bits, workload, deadline, ec_cpu, reserve, prop_peer, prop_rc, mode="semantic"):
    home = np.asarray(home)
    n_ec = len(ec_cpu)
    cycles = np.asarray(bits) * workload
    loc = np.full(len(home), -1)
    cohorts = {}
    shed_all = []
    for n in range(n_ec):
        members = [v for v in range(len(home)) if home[v] == n]
        kept, shed = shed_loop(members, ec_cpu[n], reserve[n], workload, cycles, deadline, mode)
        cohorts[n] = kept
        for v in kept:
            loc[v] = n
        shed_all += shed
    for n in range(n_ec):
        peers = sorted((q for q in range(n_ec) if q != n and prop_peer[n][q] <= prop_rc[n]),
                       key=lambda q: (prop_peer[n][q], q))
        for v in sorted(v for v in shed_all if home[v] == n):
            loc[v] = n_ec
            for q in peers:
                trial = cohorts[q] + [v]
                if cohort_ok(trial, ec_cpu[q], reserve[q], workload, cycles, deadline, mode):
                    cohorts[q] = trial
                    loc[v] = q
                    break
    return loc


# -- one environment frame ------------------------------------------------------------

def frame_oracle(env, a):
    """Delays, slacks and reward of action ``a`` composed from the module-level functions."""
    e, t, s, inf = env._ep, env.t, env.second, env.infra
    sc = env.sc
    V = env.V
    d = e["bits"][t]
    delay = np.zeros(V)
    comps = {k: np.zeros(V) for k in ("uplink", "fronthaul", "transfer", "propagation", "compute")}
    n_ec = env.n_ecs
    moved = {}
    for v in range(V):
        if a.x[v] == 1 and a.location[v] != e["home"][v]:
            key = (e["home"][v], a.location[v])
            moved[key] = moved.get(key, 0.0) + d[v]
    pair_rows = a.rows[e["pair"]]
    true = {}
    for k, (i, j) in enumerate(inf.graph.links):
        true[(i, j)] = inf.loads[k, s]
    caps = dict(zip(inf.graph.links, inf.cap))
    for v in range(V):
        if a.x[v] == 0:
            delay[v] = local_total_delay(e["mu"][t][v], 0, e["tau"][t][v], e["hold"][t][v])
            continue
        gamma = e["gamma"][t][v]
        rate = radio.instantaneous_rate(1, a.b[v], e["dev_bw"][v], gamma)
        up = radio.uplink_delay(d[v], rate, 1)
        path = inf.planner.paths[pair_rows[v]]
        fh = bottleneck_delay(path, caps, true, d[v]) + env.info_latency
        comp = cloud.ec_exec_delay(d[v], sc.workload, a.share[v])
        home, loc = e["home"][v], a.location[v]
        if loc == home:
            total = cloud.total_offload_delay(1, 0, 0, up, fh, ec_compute=comp)
            tr = pr = 0.0
        elif loc == n_ec:
            tr = cloud.transfer_delay([moved[(home, loc)]], inf.rc_links[home] * MBPS)
            pr = inf.prop_rc[home]
            total = cloud.total_offload_delay(0, 0, 1, up, fh, rc_transfer=tr, rc_propagation=pr,
                                              rc_compute=comp)
        else:
            tr = cloud.transfer_delay([moved[(home, loc)]], inf.peer_links[home, loc] * MBPS)
            pr = inf.prop_peer[home, loc]
            total = cloud.total_offload_delay(0, 1, 0, up, fh, peer_transfer=tr, peer_propagation=pr,
                                              peer_compute=comp)
        delay[v] = total
        for k, val in zip(("uplink", "fronthaul", "transfer", "propagation", "compute"), (up, fh, tr, pr, comp)):
            comps[k][v] = val
    ws = np.ones(env.n_orus)
    for v in range(V):
        ws[e["oru"][v]] -= a.x[v] * a.b[v]
    link_bits = {k: 0.0 for k in inf.graph.links}
    for v in range(V):
        if a.x[v] == 1:
            path = inf.planner.paths[pair_rows[v]]
            for p, q in zip(path[:-1], path[1:]):
                link_bits[(min(p, q), max(p, q))] += d[v]
    active = set()
    for r in a.rows:
        path = inf.planner.paths[r]
        for p, q in zip(path[:-1], path[1:]):
            active.add((min(p, q), max(p, q)))
    fs = np.array([caps[k] - true[k] - link_bits[k] / (MBPS * sc.frame_seconds)
                   for k in inf.graph.links if k in active])
    cs = inf.ec_cpu.copy()
    for v in range(V):
        if a.x[v] == 1 and a.location[v] < n_ec:
            cs[a.location[v]] -= a.share[v]
    w = sc.weights
    cod = float(np.sum(e["deadline"][t] - delay))
    reward = w[0] * cod + w[1] * ws.sum() + w[2] * fs.sum() + w[3] * cs.sum()
    return dict(delay=delay, wireless_slack=ws, fronthaul_slack=fs, compute_slack=cs, reward=reward, **comps)


# -- derivatives ---------------------------------------------------------------------

def central_difference(f, theta, h=1e-6):
    theta = np.array(theta, dtype=float)
    g = np.zeros_like(theta)
    for k in range(theta.size):
        old = theta[k]
        theta[k] = old + h
        up = f(theta)
        theta[k] = old - h
        down = f(theta)
        theta[k] = old
        g[k] = (up - down) / (2 * h)
    return g


def relative_error(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def mlp_forward_loops(vector, shape, x):
    """Matrix-product free forward pass, one scalar at a time."""
    h = list(map(float, x))
    off = 0
    n_layers = len(shape) - 1
    for k, (a, b) in enumerate(zip(shape[:-1], shape[1:])):
        W = vector[off:off + a * b]
        bias = vector[off + a * b:off + a * b + b]
        off += a * b + b
        nxt = []
        for j in range(b):
            z = bias[j] + sum(h[i] * W[i * b + j] for i in range(a))
            nxt.append(z if k == n_layers - 1 else max(z, 0.0))
        h = nxt
    return np.array(h)


def all_binary(n):
    return [np.array(bits) for bits in itertools.product((0, 1), repeat=n)]
