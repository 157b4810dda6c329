"""Graph and flow generators used by the CLI, tests and benchmarks."""

from __future__ import annotations

import itertools

import numpy as np

from .graph import GraphError, WeightedGraph
from .maxflow import EDGE, SINK_ARC, SOURCE_ARC, FlowNetwork, FlowResult


def path_graph(n: int, weight: float = 1.0) -> WeightedGraph:
    return WeightedGraph(n, [(i, i + 1, weight) for i in range(n - 1)])


def cycle_graph(n: int, weight: float = 1.0) -> WeightedGraph:
    if n < 3:
        raise GraphError("a cycle needs at least 3 vertices")
    return WeightedGraph(n, [(i, (i + 1) % n, weight) for i in range(n)])


def complete_graph(n: int, weight: float = 1.0) -> WeightedGraph:
    return WeightedGraph(n, [(u, v, weight) for u, v in itertools.combinations(range(n), 2)])


def dumbbell_graph(k: int, bridge: float = 1.0) -> WeightedGraph:
    """Two unit-weight k-cliques joined by one edge between vertices k-1 and k."""
    if k < 1:
        raise GraphError("dumbbell lobes need at least one vertex")
    edges = [(u, v, 1.0) for u, v in itertools.combinations(range(k), 2)]
    edges += [(u + k, v + k, 1.0) for u, v in itertools.combinations(range(k), 2)]
    edges.append((k - 1, k, bridge))
    return WeightedGraph(2 * k, edges)


def hypercube_graph(d: int) -> WeightedGraph:
    n = 1 << d
    return WeightedGraph(n, [(x, x ^ (1 << i), 1.0) for x in range(n)
                             for i in range(d) if x < x ^ (1 << i)])


def gnp_graph(n: int, p: float, seed: int, weight_range: tuple[float, float] | None = None) -> WeightedGraph:
    """Erdos-Renyi graph; optional uniform random weights from ``weight_range``."""
    if not 0 <= p <= 1:
        raise GraphError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = [(u, v) for u, v in itertools.combinations(range(n), 2)]
    keep = rng.random(len(pairs)) < p
    chosen = [pr for pr, k in zip(pairs, keep) if k]
    return WeightedGraph(n, _weighted(chosen, rng, weight_range))


def planted_cut_graph(n: int, p_in: float, p_out: float, seed: int,
                      weight_range: tuple[float, float] | None = None) -> WeightedGraph:
    """Two halves ``[0, n//2)`` and ``[n//2, n)``; edges inside with ``p_in``, across with ``p_out``."""
    rng = np.random.default_rng(seed)
    half = n // 2
    chosen = []
    for u, v in itertools.combinations(range(n), 2):
        p = p_in if (u < half) == (v < half) else p_out
        if rng.random() < p:
            chosen.append((u, v))
    return WeightedGraph(n, _weighted(chosen, rng, weight_range))


def random_regular_graph(n: int, d: int, seed: int, max_tries: int = 1000) -> WeightedGraph:
    """Uniform-ish random d-regular simple graph by the pairing model with restarts."""
    if n * d % 2 or d >= n:
        raise GraphError(f"no simple {d}-regular graph on {n} vertices")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        stubs = rng.permutation(np.repeat(np.arange(n), d))
        pairs = stubs.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        keys = {(int(min(u, v)), int(max(u, v))) for u, v in pairs}
        if len(keys) == len(pairs):
            return WeightedGraph(n, [(u, v, 1.0) for u, v in sorted(keys)])
    raise GraphError(f"pairing model failed {max_tries} times for n={n}, d={d}")


def _weighted(pairs, rng, weight_range):
    if weight_range is None:
        return [(u, v, 1.0) for u, v in pairs]
    lo, hi = weight_range
    # Weights on a 1/64 grid keep capacity arithmetic exact.
    ws = np.round(rng.uniform(lo, hi, len(pairs)) * 64) / 64
    return [(u, v, float(max(w, 1 / 64))) for (u, v), w in zip(pairs, ws)]


def random_acyclic_flow(n: int, m: int, walks: int, seed: int, max_skip: int = 8,
                        jump: float = 0.05, double: float = 0.5,
                        terminal_frac: float = 1 / 32) -> tuple[FlowResult, int]:
    """A random acyclic, conserved s-t flow on a random graph with n vertices and m edges.

    Vertices are placed in a random order. Every vertex is joined to the
    next two in that order and further random edges span at most
    ``max_skip`` positions. Each walk adds a random integer amount along a
    forward route from one of the first ``terminal_frac * n`` vertices to one
    of the last. Each step takes a uniformly chosen forward edge with
    probability ``jump``; otherwise it moves two positions with probability
    ``double`` and one position else. Routes are therefore long and every
    arc carries a random mix of walks.
    Returns the flow (capacities equal to flows) and the number of graph
    edges.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)

    def key(i: int, j: int) -> tuple[int, int]:
        u, v = int(order[i]), int(order[j])
        return (u, v) if u < v else (v, u)

    edges = {key(i, i + 1) for i in range(n - 1)} | {key(i, i + 2) for i in range(n - 2)}
    target = min(m, (n - 1) * max_skip - max_skip * (max_skip - 1) // 2)
    while len(edges) < target:
        i = int(rng.integers(0, n - 1))
        edges.add(key(i, min(n - 1, i + int(rng.integers(1, max_skip + 1)))))
    edge_list = sorted(edges)
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    forward: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for e, (u, v) in enumerate(edge_list):
        if pos[u] < pos[v]:
            forward[u].append((v, 2 * e))
        else:
            forward[v].append((u, 2 * e + 1))
    step: list[dict[int, tuple[int, int]]] = [
        {int(pos[w] - pos[u]): (w, a) for w, a in arcs if pos[w] - pos[u] <= 2}
        for u, arcs in enumerate(forward)]
    k = max(1, int(n * terminal_frac))
    sources = [int(x) for x in order[:k]]
    sinks = [int(x) for x in order[n - k:]]
    num_e = len(edge_list)
    source_arc = {x: 2 * (num_e + i) for i, x in enumerate(sources)}
    sink_arc = {y: 2 * (num_e + k + i) for i, y in enumerate(sinks)}
    flow = [0] * (2 * (num_e + 2 * k))
    for _ in range(walks):
        x = sources[int(rng.integers(0, k))]
        amount = int(rng.integers(1, 1000))
        route = [source_arc[x]]
        v = x
        while not (v in sink_arc and (not forward[v] or rng.random() < 0.3)):
            if rng.random() < jump:
                v, a = forward[v][int(rng.integers(0, len(forward[v])))]
            else:
                hops = step[v]
                v, a = hops[2] if 2 in hops and rng.random() < double else hops[1]
            route.append(a)
        route.append(sink_arc[v])
        for a in route:
            flow[a] += amount
    s, t = n, n + 1
    pairs = [(u, v, 1.0, 1.0, EDGE, e) for e, (u, v) in enumerate(edge_list)]
    pairs += [(s, x, 1.0, 0.0, SOURCE_ARC, x) for x in sources]
    pairs += [(y, t, 1.0, 0.0, SINK_ARC, y) for y in sinks]
    net = FlowNetwork(n + 2, s, t, pairs)
    net.cap = [max(c, f) for c, f in zip(net.cap, flow)]
    value = sum(flow[a] for a in source_arc.values())
    return FlowResult(net, value, flow, frozenset([s])), num_e


MODELS = ("path", "cycle", "complete", "dumbbell", "hypercube", "gnp", "expander", "planted")


def generate(model: str, n: int | None = None, k: int | None = None, d: int | None = None,
             p: float | None = None, seed: int = 0) -> WeightedGraph:
    """Dispatch on a model name; parameters a model does not use are ignored."""
    def need(value, name):
        if value is None:
            raise GraphError(f"model {model!r} needs --{name}")
        return value

    if model == "path":
        return path_graph(need(n, "n"))
    if model == "cycle":
        return cycle_graph(need(n, "n"))
    if model == "complete":
        return complete_graph(need(n, "n"))
    if model == "dumbbell":
        return dumbbell_graph(need(k, "k"))
    if model == "hypercube":
        return hypercube_graph(need(d, "d"))
    if model == "gnp":
        return gnp_graph(need(n, "n"), need(p, "p"), seed)
    if model == "expander":
        return random_regular_graph(need(n, "n"), need(d, "d"), seed)
    if model == "planted":
        return planted_cut_graph(need(n, "n"), need(p, "p"), need(p, "p") / 8, seed)
    raise GraphError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
