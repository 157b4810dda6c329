"""Exact s-t max-flow/min-cut and the FlowAndCut reduction.

Capacities are quantized to integers once per network so that max-flow and
min-cut values can be compared exactly. The solver is highest-label
push-relabel with the gap heuristic; a post-pass cancels flow cycles so the
support is acyclic.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .graph import Cut, GraphError, WeightedGraph, cut_stats

# Arc-pair origin tags.
EDGE, SOURCE_ARC, SINK_ARC, OTHER = 0, 1, 2, 3

_MAX_DENOMINATOR = 10**9
_MAX_EXACT_SCALE = 10**12


class FlowError(RuntimeError):
    """Internal consistency check on a flow failed (a bug, not bad input)."""


def quantization_scale(values: Iterable[float]) -> int:
    """Units per 1.0 so that every value becomes an integer.

    Uses the least common denominator of the values after rounding each to a
    fraction with denominator at most 1e9. If that denominator grows beyond
    1e12 the scale falls back to 1e9 (plain rounding to 1e-9 resolution).
    """
    lcd = 1
    for v in set(values):
        den = _denominator(v)
        lcd = lcd * den // math.gcd(lcd, den)
        if lcd > _MAX_EXACT_SCALE:
            return _MAX_DENOMINATOR
    return lcd


@lru_cache(maxsize=1 << 16)
def _denominator(v: float) -> int:
    return Fraction(v).limit_denominator(_MAX_DENOMINATOR).denominator


class FlowNetwork:
    """Directed network with paired arcs ``2k`` (forward) and ``2k+1`` (reverse).

    For an undirected edge both arcs of the pair carry the edge capacity; for
    source and sink attachments the reverse arc has capacity 0. ``kind[k]`` and
    ``ref[k]`` tag pair ``k`` with its origin (edge id or attached vertex).
    """

    def __init__(self, num_nodes: int, source: int, sink: int,
                 pairs: Sequence[tuple[int, int, float, float, int, int]]):
        if source == sink:
            raise GraphError("source and sink must differ")
        self.num_nodes = num_nodes
        self.source = source
        self.sink = sink
        self.scale = quantization_scale(
            [c for p in pairs for c in (p[2], p[3]) if c > 0] or [1.0])
        tail: list[int] = []
        head: list[int] = []
        cap: list[int] = []
        self.kind: list[int] = []
        self.ref: list[int] = []
        adj: list[list[int]] = [[] for _ in range(num_nodes)]
        for u, v, c_fwd, c_rev, kind, ref in pairs:
            if c_fwd < 0 or c_rev < 0 or not (math.isfinite(c_fwd) and math.isfinite(c_rev)):
                raise GraphError("capacities must be finite and non-negative")
            a = len(tail)
            tail += [u, v]
            head += [v, u]
            cap += [self._quantize(c_fwd), self._quantize(c_rev)]
            adj[u].append(a)
            adj[v].append(a + 1)
            self.kind.append(kind)
            self.ref.append(ref)
        self.tail = tail
        self.head = head
        self.cap = cap
        self.adj = adj

    def _quantize(self, c: float) -> int:
        # round(Fraction(c) * scale) in integer arithmetic, ties to even.
        num, den = float(c).as_integer_ratio()
        q, r = divmod(num * self.scale, den)
        if 2 * r > den or (2 * r == den and q % 2):
            q += 1
        return q

    @property
    def num_arcs(self) -> int:
        return len(self.tail)

    def real_capacity(self, arc: int) -> float:
        return self.cap[arc] / self.scale


@dataclass
class FlowResult:
    """Max-flow outcome in quantized units (``value / network.scale`` is real)."""

    network: FlowNetwork
    value_units: int
    flow: list[int]
    cut_side: frozenset[int]

    @property
    def value(self) -> float:
        return self.value_units / self.network.scale

    def real_flow(self, arc: int) -> float:
        return self.flow[arc] / self.network.scale

    def edge_flows(self, m: int) -> list[float]:
        """Flow carried by each original undirected edge (either direction)."""
        out = [0.0] * m
        net = self.network
        for k, kind in enumerate(net.kind):
            if kind == EDGE:
                out[net.ref[k]] += (self.flow[2 * k] + self.flow[2 * k + 1]) / net.scale
        return out


def max_flow(net: FlowNetwork) -> FlowResult:
    """Exact maximum s-t flow with acyclic support and a certified min cut."""
    residual = _push_relabel(net)
    flow = _arc_flows(net, residual)
    _cancel_cycles(net, flow)
    side = _residual_reach(net, flow)
    value = sum(flow[a] for a in net.adj[net.source]) - sum(
        flow[a ^ 1] for a in net.adj[net.source])
    cut_capacity = sum(net.cap[a] for a in range(net.num_arcs)
                       if net.tail[a] in side and net.head[a] not in side)
    if value != cut_capacity:
        raise FlowError(f"duality check failed: flow {value} vs cut {cut_capacity}")
    return FlowResult(net, value, flow, side)


def _push_relabel(net: FlowNetwork) -> list[int]:
    n = net.num_nodes
    s, t = net.source, net.sink
    head, adj = net.head, net.adj
    res = list(net.cap)
    excess = [0] * n
    height = _exact_labels(net, res)
    height[s] = n
    count = [0] * (2 * n + 2)
    for v in range(n):
        count[height[v]] += 1
    buckets: list[list[int]] = [[] for _ in range(2 * n + 2)]
    for a in adj[s]:
        c = res[a]
        if c > 0:
            w = head[a]
            res[a] = 0
            res[a ^ 1] += c
            excess[w] += c
            excess[s] -= c
    for v in range(n):
        if v != s and v != t and excess[v] > 0:
            buckets[height[v]].append(v)
    cur = [0] * n
    hi = 2 * n + 1
    while hi >= 0:
        bucket = buckets[hi]
        if not bucket:
            hi -= 1
            continue
        v = bucket.pop()
        if excess[v] <= 0 or height[v] != hi:
            continue
        arcs = adj[v]
        hv = height[v]
        raised = False
        while excess[v] > 0:
            i = cur[v]
            if i == len(arcs):
                # Relabel.
                low = 2 * n
                for a in arcs:
                    if res[a] > 0:
                        h = height[head[a]]
                        if h < low:
                            low = h
                new = low + 1
                count[hv] -= 1
                if count[hv] == 0 and hv < n:
                    # Gap: nothing at or above hv can reach the sink.
                    for u in range(n):
                        hu = height[u]
                        if hv < hu < n:
                            count[hu] -= 1
                            height[u] = n + 1
                            cur[u] = 0
                            count[n + 1] += 1
                            if excess[u] > 0 and u != s and u != t:
                                buckets[n + 1].append(u)
                    new = max(new, n + 1)
                    raised = True
                hv = height[v] = new
                count[new] += 1
                cur[v] = 0
                continue
            a = arcs[i]
            r = res[a]
            if r > 0:
                w = head[a]
                if hv == height[w] + 1:
                    d = excess[v] if excess[v] < r else r
                    res[a] = r - d
                    res[a ^ 1] += d
                    excess[v] -= d
                    if excess[w] == 0 and w != s and w != t:
                        buckets[height[w]].append(w)
                    excess[w] += d
                    continue
            cur[v] = i + 1
        if raised and n + 1 > hi:
            hi = n + 1
        if hv > hi:
            hi = hv
    return res


def _exact_labels(net: FlowNetwork, res: list[int]) -> list[int]:
    # Residual BFS distance to the sink; unreachable nodes start at n.
    n = net.num_nodes
    height = [n] * n
    height[net.sink] = 0
    queue = deque([net.sink])
    while queue:
        w = queue.popleft()
        for a in net.adj[w]:
            v = net.head[a]
            if height[v] == n and v != net.source and res[a ^ 1] > 0:
                height[v] = height[w] + 1
                queue.append(v)
    return height


def _arc_flows(net: FlowNetwork, residual: list[int]) -> list[int]:
    # Net flow per pair, split onto the arc it travels along.
    flow = [0] * net.num_arcs
    for k in range(len(net.kind)):
        f = net.cap[2 * k] - residual[2 * k]
        if f > 0:
            flow[2 * k] = f
        elif f < 0:
            flow[2 * k + 1] = -f
    return flow


def _cancel_cycles(net: FlowNetwork, flow: list[int]) -> int:
    """Remove flow around directed cycles until the positive support is a DAG."""
    cancelled = 0
    while True:
        cycle = _find_cycle(net, flow)
        if cycle is None:
            return cancelled
        delta = min(flow[a] for a in cycle)
        for a in cycle:
            flow[a] -= delta
        cancelled += 1


def _find_cycle(net: FlowNetwork, flow: list[int]) -> list[int] | None:
    n = net.num_nodes
    state = [0] * n  # 0 new, 1 on stack, 2 done
    for root in range(n):
        if state[root]:
            continue
        state[root] = 1
        stack = [(root, 0)]
        via: list[int] = []
        while stack:
            v, i = stack[-1]
            arcs = net.adj[v]
            while i < len(arcs) and flow[arcs[i]] <= 0:
                i += 1
            if i == len(arcs):
                state[v] = 2
                stack.pop()
                if via:
                    via.pop()
                continue
            stack[-1] = (v, i + 1)
            a = arcs[i]
            w = net.head[a]
            if state[w] == 1:
                # Arcs from w's stack position to v, closed by a.
                pos = next(j for j, (x, _) in enumerate(stack) if x == w)
                return via[pos:] + [a]
            if state[w] == 0:
                state[w] = 1
                stack.append((w, 0))
                via.append(a)
    return None


def _residual_reach(net: FlowNetwork, flow: list[int]) -> frozenset[int]:
    seen = {net.source}
    queue = deque([net.source])
    while queue:
        v = queue.popleft()
        for a in net.adj[v]:
            w = net.head[a]
            if w not in seen and net.cap[a] - flow[a] + flow[a ^ 1] > 0:
                seen.add(w)
                queue.append(w)
    return frozenset(seen)


def check_flow(result: FlowResult) -> None:
    """Raise FlowError unless capacity, conservation and acyclicity hold."""
    net, flow = result.network, result.flow
    excess = [0] * net.num_nodes
    for a in range(net.num_arcs):
        if not 0 <= flow[a] <= net.cap[a]:
            raise FlowError(f"arc {a} flow {flow[a]} outside [0, {net.cap[a]}]")
        excess[net.head[a]] += flow[a]
        excess[net.tail[a]] -= flow[a]
    for v in range(net.num_nodes):
        if v not in (net.source, net.sink) and excess[v] != 0:
            raise FlowError(f"conservation fails at node {v}")
    if excess[net.sink] != result.value_units:
        raise FlowError("sink inflow differs from flow value")
    if _find_cycle(net, flow) is not None:
        raise FlowError("flow support has a cycle")


# -- FlowAndCut ----------------------------------------------------------------


@dataclass
class FlowAndCutOutcome:
    """Either a flow of value at least ``kappa*c*n`` or a balanced sparse cut."""

    flow: FlowResult
    sources: tuple[int, ...]
    sinks: tuple[int, ...]
    threshold: float
    cut: Cut | None = None

    @property
    def is_cut(self) -> bool:
        return self.cut is not None


@dataclass
class FlowAndCutNetwork:
    network: FlowNetwork
    sources: tuple[int, ...]
    sinks: tuple[int, ...]
    kappa_units: int = field(default=0)


def endpoint_sets(proj: Sequence[float], c: float) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """The ``floor(2cn)`` least and greatest projections, ties by vertex id."""
    n = len(proj)
    k = math.floor(2 * c * n + 1e-9)
    if k < 1:
        raise GraphError(f"floor(2cn) = {k} < 1 for c={c}, n={n}")
    order = sorted(range(n), key=lambda x: (proj[x], x))
    low, high = order[:k], order[n - k:]
    if set(low) & set(high):
        raise GraphError(f"source and sink sets overlap (4cn > n for c={c}, n={n})")
    return tuple(sorted(low)), tuple(sorted(high))


def build_flow_and_cut(graph: WeightedGraph, kappa: float, c: float,
                       proj: Sequence[float]) -> FlowAndCutNetwork:
    if not kappa > 0:
        raise GraphError("kappa must be positive")
    if not 0 < c <= 0.25:
        raise GraphError("c must lie in (0, 1/4]")
    if len(proj) != graph.n:
        raise GraphError("one projection value per vertex is required")
    low, high = endpoint_sets(proj, c)
    return FlowAndCutNetwork(*attach_terminals(graph, low, high, kappa))


def attach_terminals(graph: WeightedGraph, sources: Sequence[int], sinks: Sequence[int],
                     terminal_cap: float) -> tuple[FlowNetwork, tuple[int, ...], tuple[int, ...], int]:
    n = graph.n
    s, t = n, n + 1
    pairs = [(u, v, w, w, EDGE, e) for e, (u, v, w) in enumerate(graph.edges)]
    pairs += [(s, x, terminal_cap, 0.0, SOURCE_ARC, x) for x in sources]
    pairs += [(y, t, terminal_cap, 0.0, SINK_ARC, y) for y in sinks]
    net = FlowNetwork(n + 2, s, t, pairs)
    return net, tuple(sources), tuple(sinks), net._quantize(terminal_cap)


def flow_and_cut(graph: WeightedGraph, kappa: float, c: float,
                 proj: Sequence[float]) -> FlowAndCutOutcome:
    """Max-flow between the projection extremes; a sparse balanced cut if it is small."""
    built = build_flow_and_cut(graph, kappa, c, proj)
    result = max_flow(built.network)
    n = graph.n
    # Threshold in quantized units so the branch test is exact.
    threshold = Fraction(built.kappa_units) * Fraction(c) * n
    real_threshold = kappa * c * n
    if result.value_units >= threshold:
        return FlowAndCutOutcome(result, built.sources, built.sinks, real_threshold)
    side = [x for x in result.cut_side if x < n]
    cut = cut_stats(graph, side)
    return FlowAndCutOutcome(result, built.sources, built.sinks, real_threshold, cut)


# -- DIMACS --------------------------------------------------------------------


def to_dimacs(net: FlowNetwork) -> str:
    """DIMACS max-flow text; capacities are written in quantized integer units."""
    lines = [f"c scale {net.scale}",
             f"p max {net.num_nodes} {net.num_arcs}",
             f"n {net.source + 1} s",
             f"n {net.sink + 1} t"]
    for a in range(net.num_arcs):
        if net.cap[a] > 0:
            lines.append(f"a {net.tail[a] + 1} {net.head[a] + 1} {net.cap[a]}")
    return "\n".join(lines) + "\n"


def from_dimacs(text: str) -> FlowNetwork:
    """Parse a DIMACS max-flow problem; each arc becomes its own pair."""
    num_nodes = source = sink = None
    scale = 1
    arcs: list[tuple[int, int, float, float, int, int]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "c":
                if len(parts) == 3 and parts[1] == "scale":
                    scale = int(parts[2])
            elif tag == "p":
                num_nodes = int(parts[2])
            elif tag == "n":
                node = int(parts[1]) - 1
                if parts[2] == "s":
                    source = node
                elif parts[2] == "t":
                    sink = node
            elif tag == "a":
                u, v, cap = int(parts[1]) - 1, int(parts[2]) - 1, int(parts[3])
                arcs.append((u, v, cap / scale, 0.0, OTHER, len(arcs)))
            else:
                raise GraphError(f"line {line_no}: unknown record {tag!r}")
        except (IndexError, ValueError):
            raise GraphError(f"line {line_no}: malformed DIMACS record {raw.strip()!r}") from None
    if num_nodes is None or source is None or sink is None:
        raise GraphError("DIMACS input lacks a problem line, source or sink")
    return FlowNetwork(num_nodes, source, sink, arcs)
