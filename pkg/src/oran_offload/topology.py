"""Fronthaul bridged network: graph model, IGP shortest paths and two-segment routing.

Capacities on the graph are in Mbps. Route delays are computed from a demand in
bits and the residual capacity (capacity minus background load) of the path's
bottleneck link.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
import yaml

from .errors import (
    DisconnectedTopology,
    DuplicateLink,
    NoPath,
    NoValidIntermediate,
    TopologyError,
    UnknownEndpoint,
    ZeroCapacity,
)

MBPS = 1e6
# residual capacity never drops below this fraction of the nominal capacity
MIN_RESIDUAL_FRACTION = 0.01


def link_key(a, b):
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class FronthaulGraph:
    """Undirected TSN-bridge graph with symmetric link capacities (Mbps)."""

    nodes: tuple
    capacities: Mapping[tuple, float]
    ingress_map: Mapping = field(default_factory=dict)
    egress_map: Mapping = field(default_factory=dict)
    domain_id: int = 0

    def __post_init__(self):
        adj = {n: [] for n in self.nodes}
        for a, b in self.capacities:
            adj[a].append(b)
            adj[b].append(a)
        for n in adj:
            adj[n].sort()
        object.__setattr__(self, "_adj", adj)
        links = tuple(sorted(self.capacities))
        object.__setattr__(self, "_links", links)
        object.__setattr__(self, "_index", {e: k for k, e in enumerate(links)})

    @property
    def links(self) -> tuple:
        return self._links

    def neighbors(self, n):
        return self._adj[n]

    def capacity(self, a, b) -> float:
        return self.capacities[link_key(a, b)]

    def link_index(self, a, b) -> int:
        return self._index[link_key(a, b)]

    def capacity_array(self) -> np.ndarray:
        return np.array([self.capacities[e] for e in self._links], dtype=float)

    def path_links(self, path: Sequence) -> list[int]:
        return [self.link_index(a, b) for a, b in zip(path[:-1], path[1:])]

    def to_networkx(self, weight=None) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(self.nodes)
        w = link_weights(self, weight)
        for (a, b), cap in self.capacities.items():
            G.add_edge(a, b, capacity=cap, weight=w[(a, b)])
        return G

    def to_spec(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "links": [[a, b, float(c)] for (a, b), c in sorted(self.capacities.items())],
            "ingress": {str(k): v for k, v in self.ingress_map.items()},
            "egress": {str(k): v for k, v in self.egress_map.items()},
            "domain_id": self.domain_id,
        }


def _is_connected(nodes, adj) -> bool:
    if not nodes:
        return False
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        n = stack.pop()
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return len(seen) == len(nodes)


def _map_keys(raw: Mapping | None) -> dict:
    out = {}
    for k, v in (raw or {}).items():
        try:
            k = int(k)
        except (TypeError, ValueError):
            pass
        out[k] = v
    return out


def build_topology(spec: Mapping) -> FronthaulGraph:
    """Validate a node/link description and build the graph.

    ``spec`` holds ``nodes``, ``links`` as ``(i, j, capacity_mbps)`` records and
    optional ``ingress`` (O-RU -> node) / ``egress`` (EC -> node) maps.
    """
    nodes = tuple(spec["nodes"])
    if len(nodes) < 2:
        raise TopologyError("a fronthaul graph needs at least two nodes")
    if len(set(nodes)) != len(nodes):
        raise TopologyError("duplicate node identifiers")
    node_set = set(nodes)
    caps = {}
    for rec in spec.get("links", []):
        a, b, cap = rec
        if a not in node_set or b not in node_set:
            raise UnknownEndpoint(f"link ({a}, {b}) references an unknown node")
        if a == b:
            raise TopologyError(f"self-loop on node {a}")
        cap = float(cap)
        if not cap > 0:
            raise ZeroCapacity(f"link ({a}, {b}) has non-positive capacity {cap}")
        key = link_key(a, b)
        if key in caps:
            raise DuplicateLink(f"link {key} listed twice")
        caps[key] = cap
    adj = {n: [] for n in nodes}
    for a, b in caps:
        adj[a].append(b)
        adj[b].append(a)
    if not _is_connected(list(nodes), adj):
        raise DisconnectedTopology("fronthaul graph is not connected")
    ingress = _map_keys(spec.get("ingress"))
    egress = _map_keys(spec.get("egress"))
    for name, m in (("ingress", ingress), ("egress", egress)):
        for k, n in m.items():
            if n not in node_set:
                raise UnknownEndpoint(f"{name} map entry {k} -> {n} is not a graph node")
    return FronthaulGraph(nodes, caps, ingress, egress, int(spec.get("domain_id", 0)))


def cube_spec(capacity=(6000.0, 6500.0), rng=None, ingress=(0, 1, 2), egress=(7, 6, 5)) -> dict:
    """The 8-node cubical graph: 3-bit labels, edges between Hamming-distance-1 labels."""
    nodes = list(range(8))
    pairs = [(a, b) for a, b in itertools.combinations(nodes, 2) if bin(a ^ b).count("1") == 1]
    lo, hi = capacity
    if rng is None or lo == hi:
        caps = [float(lo)] * len(pairs)
    else:
        caps = [float(c) for c in rng.uniform(lo, hi, size=len(pairs))]
    return {
        "nodes": nodes,
        "links": [[a, b, c] for (a, b), c in zip(pairs, caps)],
        "ingress": {m: n for m, n in enumerate(ingress)},
        "egress": {k: n for k, n in enumerate(egress)},
        "domain_id": 0,
    }


def load_topology(path) -> FronthaulGraph:
    with open(path) as fh:
        return build_topology(yaml.safe_load(fh))


def dump_topology(g_or_spec, path) -> None:
    spec = g_or_spec.to_spec() if isinstance(g_or_spec, FronthaulGraph) else g_or_spec
    Path(path).write_text(yaml.safe_dump(spec, sort_keys=False))


def link_weights(g: FronthaulGraph, weight=None) -> dict:
    """Per-link IGP cost. ``None``/"inverse_capacity" -> 1/capacity, "unit" -> 1."""
    if weight is None or weight == "inverse_capacity":
        return {e: 1.0 / c for e, c in g.capacities.items()}
    if weight == "unit":
        return {e: 1.0 for e in g.capacities}
    if callable(weight):
        return {e: float(weight(*e)) for e in g.capacities}
    return {link_key(*e): float(w) for e, w in weight.items()}


def path_cost(path: Sequence, weights: Mapping) -> float:
    return sum(weights[link_key(a, b)] for a, b in zip(path[:-1], path[1:]))


def shortest_path(g: FronthaulGraph, i, j, weight=None, exclude: Iterable = ()) -> list:
    """Minimum-cost path from i to j.

    Ties are broken towards the lexicographically smallest node sequence. Nodes
    in ``exclude`` are never visited.
    """
    if i not in g._adj or j not in g._adj:
        raise UnknownEndpoint(f"unknown endpoint {i!r} or {j!r}")
    w = link_weights(g, weight)
    if any(c <= 0 for c in w.values()):
        raise TopologyError("link costs must be positive")
    banned = set(exclude)
    heap = [(0.0, (i,))]
    done = set()
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done.add(node)
        if node == j:
            return list(path)
        for m in g._adj[node]:
            if m in done or m in banned:
                continue
            heapq.heappush(heap, (cost + w[link_key(node, m)], path + (m,)))
    raise NoPath(f"no path from {i!r} to {j!r}")


def all_simple_paths(g: FronthaulGraph, i, j) -> list[list]:
    out = []

    def walk(path, seen):
        n = path[-1]
        if n == j:
            out.append(list(path))
            return
        for m in g._adj[n]:
            if m not in seen:
                seen.add(m)
                path.append(m)
                walk(path, seen)
                path.pop()
                seen.discard(m)

    walk([i], {i})
    return out


def betweenness(g: FronthaulGraph, weight=None) -> dict:
    return nx.betweenness_centrality(g.to_networkx(weight), weight="weight", normalized=True)


@dataclass(frozen=True)
class SegmentPath:
    first_segment: tuple
    second_segment: tuple
    intermediate: object

    @property
    def nodes(self) -> tuple:
        return self.first_segment + self.second_segment[1:]

    @property
    def source(self):
        return self.first_segment[0]

    @property
    def target(self):
        return self.second_segment[-1]


def make_segment_path(g: FronthaulGraph, i, w, j, weight=None) -> SegmentPath | None:
    """Two IGP segments i->w and w->j, or None when w is an endpoint or the join loops."""
    if w == i or w == j:
        return None
    first = shortest_path(g, i, w, weight)
    second = shortest_path(g, w, j, weight)
    if set(first[:-1]) & set(second):
        return None
    return SegmentPath(tuple(first), tuple(second), w)


def residual_capacity(g: FronthaulGraph, loads=None) -> np.ndarray:
    """Per-link residual capacity (Mbps) aligned with ``g.links``."""
    cap = g.capacity_array()
    if loads is None:
        return cap
    if isinstance(loads, Mapping):
        used = np.zeros_like(cap)
        for e, v in loads.items():
            used[g.link_index(*e)] = v
    else:
        used = np.asarray(loads, dtype=float)
    return np.maximum(cap - used, MIN_RESIDUAL_FRACTION * cap)


def path_transmission_delay(load, bottleneck_capacity) -> float:
    """Seconds to push ``load`` through a path limited by its smallest capacity."""
    cap = float(np.min(bottleneck_capacity))
    if not cap > 0:
        raise ZeroCapacity("path capacity must be positive")
    return float(load) / cap


def path_delay(g: FronthaulGraph, path: Sequence, demand_bits: float, loads=None) -> float:
    if len(path) < 2:
        return 0.0
    resid = residual_capacity(g, loads)
    return path_transmission_delay(demand_bits, resid[g.path_links(path)] * MBPS)


def select_intermediate(g: FronthaulGraph, i, j, mode="min_delay", loads=None, weight=None,
                        demand_bits=1e6) -> object:
    """Pick the bridge w that splits the i->j route into two segments."""
    if len(g.nodes) < 3:
        raise NoValidIntermediate("need at least three nodes for segment routing")
    candidates = []
    for w in sorted(n for n in g.nodes if n not in (i, j)):
        sp = make_segment_path(g, i, w, j, weight)
        if sp is not None:
            candidates.append((w, sp))
    if not candidates:
        raise NoValidIntermediate(f"every intermediate for ({i}, {j}) loops")
    if mode == "centrality":
        bc = betweenness(g, weight)
        return min(candidates, key=lambda c: (-round(bc[c[0]], 12), c[0]))[0]
    if mode == "min_delay":
        return min(candidates, key=lambda c: (path_delay(g, c[1].nodes, demand_bits, loads), c[0]))[0]
    raise ValueError(f"unknown intermediate selection mode {mode!r}")


def segment_load(decisions: Iterable, i, j, w) -> float:
    """Bits offloaded through the (i, j, w) path: sum of x * d over assigned devices.

    Each decision is ``(device, bits, offload_flag, (i, j, w))``; ``w`` is None
    for the unsegmented shortest path.
    """
    total = 0.0
    for _, bits, x, key in decisions:
        if bits < 0 or x not in (0, 1):
            raise ValueError("decisions need bits >= 0 and a binary offload flag")
        if tuple(key) == (i, j, w):
            total += x * bits
    return total


@dataclass(frozen=True)
class RouteChoice:
    eta_sp: int
    eta_sr: int
    sp_path: tuple
    sr_path: SegmentPath | None
    delay_sp: float
    delay_sr: float
    chosen_delay: float

    @property
    def path(self) -> tuple:
        return self.sp_path if self.eta_sp else self.sr_path.nodes


def fronthaul_delay(eta_sp, delay_sp, eta_sr, delay_sr) -> float:
    return eta_sp * delay_sp + eta_sr * delay_sr


def select_route(g: FronthaulGraph, i, j, loads=None, demand_bits=1e6, mode="min_delay",
                 weight=None) -> RouteChoice:
    """Compare the IGP shortest path with the best two-segment path; ties keep SP."""
    sp = tuple(shortest_path(g, i, j, weight))
    d_sp = path_delay(g, sp, demand_bits, loads)
    try:
        w = select_intermediate(g, i, j, mode, loads, weight, demand_bits)
    except NoValidIntermediate:
        return RouteChoice(1, 0, sp, None, d_sp, float("inf"), d_sp)
    sr = make_segment_path(g, i, w, j, weight)
    d_sr = path_delay(g, sr.nodes, demand_bits, loads)
    eta_sp = 1 if d_sp <= d_sr else 0
    eta_sr = 1 - eta_sp
    return RouteChoice(eta_sp, eta_sr, sp, sr, d_sp, d_sr, fronthaul_delay(eta_sp, d_sp, eta_sr, d_sr))


class RoutePlanner:
    """Precomputed SP and SR candidates for every ingress/egress pair.

    Evaluates route choices for all pairs at once from a per-link load vector,
    which is what the environment needs every frame.
    """

    def __init__(self, g: FronthaulGraph, mode="min_delay", weight=None):
        self.g = g
        self.mode = mode
        self.weight = weight
        self.cap = g.capacity_array()
        orus = sorted(g.ingress_map)
        ecs = sorted(g.egress_map)
        self.pairs = [(m, n) for m in orus for n in ecs]
        self.n_ecs = len(ecs)
        n_links = len(g.links)
        rows, owner, wnode, paths = [], [], [], []
        self.sp_row = np.zeros(len(self.pairs), dtype=int)
        bc = betweenness(g, weight) if mode == "centrality" else None
        for p, (m, n) in enumerate(self.pairs):
            i, j = g.ingress_map[m], g.egress_map[n]
            sp = tuple(shortest_path(g, i, j, weight))
            self.sp_row[p] = len(rows)
            rows.append(g.path_links(sp))
            owner.append(p)
            wnode.append(None)
            paths.append(sp)
            cands = []
            if i != j and len(g.nodes) >= 3:
                for w in sorted(x for x in g.nodes if x not in (i, j)):
                    seg = make_segment_path(g, i, w, j, weight)
                    if seg is not None:
                        cands.append((w, seg))
            if mode == "centrality" and cands:
                cands = [min(cands, key=lambda c: (-round(bc[c[0]], 12), c[0]))]
            for w, seg in cands:
                rows.append(g.path_links(seg.nodes))
                owner.append(p)
                wnode.append(w)
                paths.append(seg.nodes)
        self.mask = np.zeros((len(rows), n_links), dtype=bool)
        for r, links in enumerate(rows):
            self.mask[r, links] = True
        self.single = ~self.mask.any(axis=1)
        self.owner = np.array(owner)
        self.wnode = wnode
        self.paths = paths
        self.sr_rows = [np.flatnonzero((self.owner == p) & (np.arange(len(rows)) != self.sp_row[p]))
                        for p in range(len(self.pairs))]

    def pair_index(self, m, n) -> int:
        return m * self.n_ecs + n

    def bottlenecks(self, loads) -> np.ndarray:
        resid = np.maximum(self.cap - np.asarray(loads, dtype=float), MIN_RESIDUAL_FRACTION * self.cap)
        b = np.where(self.mask, resid[None, :], np.inf).min(axis=1)
        return b * MBPS

    def choose(self, info_loads, sp_only=False):
        """Row index of the selected path per pair and its SR flag, decided on ``info_loads``."""
        bn = self.bottlenecks(info_loads)
        rows = self.sp_row.copy()
        eta_sr = np.zeros(len(self.pairs), dtype=int)
        if sp_only:
            return rows, eta_sr
        for p, cand in enumerate(self.sr_rows):
            if len(cand) == 0 or self.single[rows[p]]:
                continue
            # largest bottleneck == smallest delay for the same demand; lowest w wins ties
            best = cand[np.argmax(bn[cand])]
            if bn[best] > bn[rows[p]]:
                rows[p] = best
                eta_sr[p] = 1
        return rows, eta_sr

    def delays(self, rows, demand_bits, true_loads) -> np.ndarray:
        bn = self.bottlenecks(true_loads)
        out = np.where(self.single[rows], 0.0, np.asarray(demand_bits, dtype=float) / bn[rows])
        return out
