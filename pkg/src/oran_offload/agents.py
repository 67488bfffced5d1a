"""Decision agents: deep Q-learning, tabular Q-learning, a greedy heuristic, and the training loop."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .env import LOCAL, N_FEATURES, OffloadEnv, step_log_row
from .errors import EmptyActionSet, ShapeMismatch
from .nn import ModelParams, mlp_backward, mlp_forward, mlp_init
from .scenario import seed_stream

N_ACTIONS = 2  # per device: 0 = compute locally, 1 = offload via the attached O-RU


class ReplayMemory:
    """Fixed-capacity ring buffer of per-device transitions; the oldest entry is overwritten first.

    One row per transition: ``s | s2 | a | r | done | mask2``.
    """

    def __init__(self, capacity, dim, n_actions=N_ACTIONS):
        if capacity <= 0:
            raise ValueError("replay capacity must be positive")
        self.capacity = int(capacity)
        self.dim = dim
        self.n_actions = n_actions
        self.rows = np.zeros((self.capacity, 2 * dim + 3 + n_actions))
        self.pos = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, s, a, r, s2, done, mask2=None):
        s = np.atleast_2d(s)
        n, d = s.shape
        if d != self.dim:
            raise ShapeMismatch("transition state dimension differs from the memory's")
        block = np.empty((n, self.rows.shape[1]))
        block[:, :d] = s
        block[:, d:2 * d] = s2
        block[:, 2 * d] = a
        block[:, 2 * d + 1] = r
        block[:, 2 * d + 2] = done
        block[:, 2 * d + 3:] = 1.0 if mask2 is None else mask2
        end = self.pos + n
        if end <= self.capacity:
            self.rows[self.pos:end] = block
        else:
            self.rows[(self.pos + np.arange(n)) % self.capacity] = block
        self.pos = end % self.capacity
        self.size = min(self.size + n, self.capacity)

    def sample(self, batch, rng):
        rows = self.rows[rng.integers(0, self.size, size=batch)]
        d = self.dim
        return (rows[:, :d], rows[:, 2 * d].astype(np.int64), rows[:, 2 * d + 1], rows[:, d:2 * d],
                rows[:, 2 * d + 2] > 0, rows[:, 2 * d + 3:] > 0)


def epsilon_greedy(qvals, eps, rng) -> int:
    """Uniform random index with probability ``eps``, else the first maximiser."""
    q = np.asarray(qvals, dtype=float).ravel()
    if q.size == 0:
        raise EmptyActionSet("no actions to choose from")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < eps:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


@njit(cache=True)
def _masked_pick(Q, mask, explore, pick):
    n, m = Q.shape
    out = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if explore[i]:
            n_valid = 0
            for j in range(m):
                n_valid += mask[i, j]
            # k-th admissible action, k uniform over the admissible count
            if n_valid == 0:
                continue
            k = min(int(pick[i] * n_valid), n_valid - 1)
            for j in range(m):
                if mask[i, j]:
                    if k == 0:
                        out[i] = j
                        break
                    k -= 1
        else:
            best, arg = -np.inf, -1
            for j in range(m):
                if mask[i, j] and (arg < 0 or Q[i, j] > best):
                    best, arg = Q[i, j], j
            out[i] = arg
    return out


def masked_epsilon_greedy(Q, mask, eps, rng) -> np.ndarray:
    """Row-wise epsilon-greedy restricted to admissible actions."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    mask = np.broadcast_to(np.asarray(mask, dtype=np.bool_), Q.shape)
    explore = rng.random(Q.shape[0]) < eps
    pick = rng.random(Q.shape[0])
    out = _masked_pick(Q, mask, explore, pick)
    if Q.shape[1] == 0 or np.any(out < 0):
        raise EmptyActionSet("a row has no admissible action")
    return out


def linear_epsilon(episode, episodes, start=1.0, end=0.05, fraction=0.2) -> float:
    span = max(1, int(math.ceil(fraction * episodes)))
    if episode >= span:
        return end
    return start + (end - start) * episode / span


def dql_target(r, s2, target: ModelParams, gamma, done, mask2=None):
    """r + gamma * max_a Q_target(s', a), or r at terminal transitions."""
    r = np.asarray(r, dtype=float)
    q2 = mlp_forward(target, s2)
    if mask2 is not None:
        q2 = np.where(mask2, q2, -np.inf)
    best = np.max(np.atleast_2d(q2), axis=-1).reshape(r.shape)
    return np.where(done, r, r + gamma * np.where(done, 0.0, best))


def sync_target(q: ModelParams) -> ModelParams:
    return q.copy()


class DQLAgent:
    """Shared per-device Q-network with replay memory and a periodically synced target network."""

    name = "dql"

    def __init__(self, n_features=N_FEATURES, hidden=64, lr=0.001, gamma=0.995, batch=64,
                 replay=100000, sync_every=100, grad_clip=10.0, seed=0):
        if replay <= batch:
            raise ValueError("replay capacity must exceed the batch size")
        self.rng = np.random.default_rng(seed)
        self.q = mlp_init((n_features, hidden, hidden, N_ACTIONS), self.rng, out_scale=0.1)
        self.target = sync_target(self.q)
        self.lr, self.gamma, self.batch = lr, gamma, batch
        self.sync_every, self.grad_clip = sync_every, grad_clip
        self.memory = ReplayMemory(replay, n_features)
        self.steps = 0
        self.divergence = []  # max |Q - Q_target| on the batch just before each sync

    def act(self, obs, mask, eps):
        return masked_epsilon_greedy(mlp_forward(self.q, obs), mask, eps, self.rng)

    def greedy(self, obs, mask):
        return masked_epsilon_greedy(mlp_forward(self.q, obs), mask, 0.0, self.rng)

    def learn(self, s, a, r, s2, done, mask2):
        self.memory.push(s, a, r, s2, done, mask2)
        if len(self.memory) < self.batch:
            return None  # warm-up: wait until one batch is stored
        bs, ba, br, bs2, bd, bm = self.memory.sample(self.batch, self.rng)
        q2 = np.where(bm, mlp_forward(self.target, bs2), -np.inf).max(axis=1)
        y = br + self.gamma * np.where(bd, 0.0, q2)
        grad, loss = mlp_backward(self.q, bs, y, ba)
        if self.grad_clip:
            norm = float(np.sqrt(grad @ grad))
            if norm > self.grad_clip:
                grad *= self.grad_clip / norm
        self.q.vector -= self.lr * grad
        self.steps += 1
        if self.steps % self.sync_every == 0:
            gap = mlp_forward(self.q, bs) - mlp_forward(self.target, bs)
            self.divergence.append(float(np.abs(gap).max()))
            self.target.vector[:] = self.q.vector
        return loss


_EMPTY = -1


@njit(cache=True)
def _slot(keys, key):
    mask = keys.size - 1
    h = (key ^ (key >> 29)) * 0x9E3779B97F4A7C15
    i = (h ^ (h >> 32)) & mask
    while keys[i] != key and keys[i] != _EMPTY:
        i = (i + 1) & mask
    return i


@njit(cache=True)
def _lookup(keys, vals, query, out):
    for j in range(query.size):
        i = _slot(keys, query[j])
        if keys[i] == query[j]:
            out[j] = vals[i]
        else:
            out[j] = 0.0


@njit(cache=True)
def _update(keys, vals, query, actions, targets, alpha):
    """Sequential one-step updates; returns (new keys inserted, sum of squared TD errors)."""
    added = 0
    sq = 0.0
    for j in range(query.size):
        i = _slot(keys, query[j])
        if keys[i] != query[j]:
            keys[i] = query[j]
            added += 1
        err = targets[j] - vals[i, actions[j]]
        vals[i, actions[j]] += alpha * err
        sq += err * err
    return added, sq


@njit(cache=True)
def _reinsert(keys, vals, new_keys, new_vals):
    for i in range(keys.size):
        if keys[i] != _EMPTY:
            j = _slot(new_keys, keys[i])
            new_keys[j] = keys[i]
            new_vals[j] = vals[i]


class QTable:
    """Action values over non-negative integer state keys (open-addressing hash table)."""

    def __init__(self, alpha=0.001, gamma=0.995, n_actions=N_ACTIONS, capacity=1 << 16):
        if not alpha > 0:
            raise ValueError("learning rate must be positive")
        if not 0 < gamma <= 1:
            raise ValueError("discount must lie in (0, 1]")
        self.alpha, self.gamma, self.n_actions = float(alpha), float(gamma), n_actions
        cap = 1 << max(4, int(capacity - 1).bit_length())
        self.keys = np.full(cap, _EMPTY, dtype=np.int64)
        self.vals = np.zeros((cap, n_actions))
        self.count = 0

    def __len__(self):
        return self.count

    def _grow(self, extra):
        if 2 * (self.count + extra) <= self.keys.size:
            return
        cap = self.keys.size
        while 2 * (self.count + extra) > cap:
            cap *= 2
        keys = np.full(cap, _EMPTY, dtype=np.int64)
        vals = np.zeros((cap, self.n_actions))
        _reinsert(self.keys, self.vals, keys, vals)
        self.keys, self.vals = keys, vals

    def lookup(self, query) -> np.ndarray:
        query = np.ascontiguousarray(query, dtype=np.int64).ravel()
        out = np.empty((query.size, self.n_actions))
        _lookup(self.keys, self.vals, query, out)
        return out

    def values(self, key) -> np.ndarray:
        return self.lookup([key])[0]

    def update(self, query, actions, targets) -> float:
        query = np.ascontiguousarray(query, dtype=np.int64).ravel()
        self._grow(query.size)
        added, sq = _update(self.keys, self.vals, query, np.asarray(actions, dtype=np.int64).ravel(),
                            np.asarray(targets, dtype=float).ravel(), self.alpha)
        self.count += added
        return sq


def q_update(q: QTable, s, a, r, s2, done=False, mask2=None) -> float:
    """One-step update Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a)); returns the new value."""
    nxt = q.values(s2)
    if mask2 is not None:
        nxt = np.where(mask2, nxt, -np.inf)
    target = r if done else r + q.gamma * float(np.max(nxt))
    q.update([s], [a], [target])
    return float(q.values(s)[a])


@njit(cache=True)
def _discretize(obs, bins):
    n, m = obs.shape
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        key = 0
        for j in range(m - 1, -1, -1):
            v = obs[i, j] * bins
            b = bins - 1 if v >= bins - 1 else (0 if v < 1 else int(v))
            key = key * bins + b
        out[i] = key
    return out


def discretize(obs, bins=8) -> np.ndarray:
    """Integer key per row from uniform binning of each coordinate over [0, 1]."""
    obs = np.ascontiguousarray(np.atleast_2d(obs), dtype=float)
    return _discretize(obs, int(bins))


class QLearningAgent:
    """Tabular baseline sharing one table across devices."""

    name = "qlearning"

    def __init__(self, alpha=0.001, gamma=0.995, bins=8, seed=0):
        self.q = QTable(alpha, gamma)
        self.bins = bins
        self.rng = np.random.default_rng(seed)
        self._keys = (None, None)  # last (observation, keys) pair; next state becomes current state

    def _key(self, obs):
        if self._keys[0] is obs:
            return self._keys[1]
        k = discretize(obs, self.bins)
        self._keys = (obs, k)
        return k

    def act(self, obs, mask, eps):
        return masked_epsilon_greedy(self.q.lookup(self._key(obs)), mask, eps, self.rng)

    def greedy(self, obs, mask):
        return self.act(obs, mask, 0.0)

    def learn(self, s, a, r, s2, done, mask2):
        ks = self._key(s)
        q2 = np.where(mask2, self.q.lookup(self._key(s2)), -np.inf).max(axis=1)
        target = np.where(done, r, r + self.q.gamma * np.where(done, 0.0, q2))
        return self.q.update(ks, a, target) / len(target)


class GreedyPolicy:
    """Myopic per-device placement minimizing the device's own single-frame delay estimate."""

    name = "greedy"

    def plan(self, env: OffloadEnv):
        return greedy_baseline(env)


def greedy_baseline(env: OffloadEnv):
    """Explicit action choosing, device by device, the cheapest of local / home EC / peer / RC.

    Uplink and compute estimates account for the devices already assigned in
    this frame; a cloud location is used only while it still admits the task.
    """
    e, t, s, inf = env._ep, env.t, env.second, env.infra
    sc = env.sc
    V, nec = env.V, env.n_ecs
    d, dl = e["bits"][t], e["deadline"][t]
    wl = sc.workload
    n_oru = np.zeros(env.n_orus)
    z_at = np.zeros(nec + 1)
    cpu = np.append(inf.ec_cpu, inf.rc_cpu)
    reserve = np.append(inf.reserve, 0.0)
    rows = env.rows[s]
    x = np.zeros(V, dtype=int)
    place = np.full(V, LOCAL)
    for v in np.argsort(dl, kind="stable"):
        if e["mu"][t][v] == 1:
            continue
        m, h = e["oru"][v], e["home"][v]
        up = d[v] / (e["bandwidth"][m] / (n_oru[m] + 1.0) * e["gamma"][t][v])
        fh = d[v] / inf.bn_true[rows[e["pair"][v]], s] + env.info_latency
        best, where = e["loc_delay"][t][v], LOCAL
        for q in range(nec + 1):
            z_new = z_at[q] + wl
            share = cpu[q] * wl / z_new
            if q < nec and cpu[q] - share < reserve[q]:
                continue
            extra = 0.0 if q == h else d[v] / inf.links[h, q] + inf.props[h, q]
            cost = up + fh + extra + d[v] * wl / share
            if cost < best:
                best, where = cost, q
        if where != LOCAL:
            x[v] = 1
            place[v] = where
            n_oru[m] += 1
            z_at[where] += wl
    return env.decide(x, placement=place)


# -- training loop --------------------------------------------------------------

TRAIN_LOG_COLUMNS = ("episode", "total_reward", "epsilon", "td_loss_mean")


@dataclass
class TrainResult:
    log: list  # rows of TRAIN_LOG_COLUMNS
    route_log: list  # per episode: (episode, offloaded, over_sr)
    delay_log: list  # per episode: mean delays (local, offload, fronthaul)
    step_log: list
    constraint_checks: dict
    routing_record: dict
    seconds: float

    @property
    def rewards(self) -> np.ndarray:
        return np.array([row[1] for row in self.log])


def make_agent(kind, rl: dict, seed):
    """Agent by name; its random draws come from the run seed's agent stream."""
    seed = seed_stream(seed, "agent")
    if kind == "dql":
        return DQLAgent(N_FEATURES, rl["hidden"], rl["lr"], rl["gamma"], rl["batch"], rl["replay"],
                        rl["sync_every"], rl.get("grad_clip", 0.0), seed)
    if kind == "qlearning":
        return QLearningAgent(rl["lr"], rl["gamma"], rl["bins"], seed)
    if kind == "greedy":
        return GreedyPolicy()
    raise ValueError(f"unknown agent {kind!r}")


def train(env: OffloadEnv, agent, episodes, seed, rl: dict | None = None, step_log_episodes=0,
          check_constraints=False):
    """Run ``episodes`` episodes, learning after every frame.

    Greedy policies are simply rolled out. Returns the per-episode log plus a
    routing record (SR usage per O-RU/EC pair) for the forecasting side.
    """
    rl = rl or {}
    t0 = time.perf_counter()
    log, route_log, delay_log, step_log = [], [], [], []
    checks = {"steps": 0, "violating": 0, "violating_ok": 0, "satisfied": 0, "samples": []}
    sample_rng = seed_stream(seed, "audit")
    sr_count = np.zeros(len(env.infra.planner.pairs))
    use_count = np.zeros_like(sr_count)
    learns = hasattr(agent, "learn")
    for ep in range(episodes):
        eps = linear_epsilon(ep, episodes, rl.get("eps_start", 1.0), rl.get("eps_end", 0.05),
                             rl.get("eps_fraction", 0.2)) if learns else 0.0
        env.reset(seed, ep)
        obs, mask = env.observe(), env.valid_mask()
        total, losses = 0.0, []
        n_off = n_sr = 0
        d_loc, d_off, d_fh = [], [], []
        while not env.done:
            if learns:
                a = agent.act(obs, mask, eps)
                action = env.decide(a)
            else:
                action = agent.plan(env)
            step = env.t
            _, r, done, info = env.step(action, return_state=False)
            total += r
            off = action.x == 1
            n_off += int(off.sum())
            n_sr += info["n_sr"]
            pairs = env.pair()[off]
            use_count += np.bincount(pairs, minlength=len(use_count))
            sr_count += np.bincount(pairs, weights=action.eta[pairs], minlength=len(sr_count))
            if (~off).any():
                d_loc.append(info["tau_loc"][~off].mean())
            if off.any():
                d_off.append(info["tau_off"][off].mean())
                d_fh.append(info["fronthaul"][off].mean())
            if learns:
                nobs, nmask = (env.observe(), env.valid_mask()) if not done else (obs, mask)
                loss = agent.learn(obs, action.x, info["device_reward"], nobs,
                                   np.full(env.V, done), nmask)
                if loss is not None:
                    losses.append(loss)
                obs, mask = nobs, nmask
            if check_constraints:
                _check(info, checks, sample_rng, ep, step)
            if ep >= episodes - step_log_episodes:
                step_log.append(step_log_row(ep, step, info))
        log.append((ep, total, eps, float(np.mean(losses)) if losses else float("nan")))
        route_log.append((ep, n_off, n_sr))
        delay_log.append((ep, _mean(d_loc), _mean(d_off), _mean(d_fh)))
    record = {
        "pairs": [list(p) for p in env.infra.planner.pairs],
        "sr_fraction": np.divide(sr_count, use_count, out=np.zeros_like(sr_count),
                                 where=use_count > 0).tolist(),
        "offloads": use_count.astype(int).tolist(),
    }
    return TrainResult(log, route_log, delay_log, step_log, checks, record, time.perf_counter() - t0)


def _mean(v):
    return float(np.mean(v)) if v else float("nan")


def _check(info, checks, rng, ep, step):
    """Every frame either meets constraints (a)(b)(c) or is penalized below its repaired twin.

    Keeps a uniform reservoir sample of 100 audited frames.
    """
    checks["steps"] += 1
    mins = (float(info["wireless_slack"].min()), float(info["fronthaul_slack"].min()),
            float(info["compute_slack"].min()))
    ok = min(mins) >= 0
    if ok:
        checks["satisfied"] += 1
    else:
        checks["violating"] += 1
        if info["reward"] < info["repaired"]:
            checks["violating_ok"] += 1
    rec = (ep, step, ok, info["reward"], info["repaired"], *mins)
    k = checks["steps"]
    if len(checks["samples"]) < 100:
        checks["samples"].append(rec)
    else:
        j = int(rng.integers(k))
        if j < 100:
            checks["samples"][j] = rec
