"""Directed matchings from flows, their chain compositions, and cover checks.

A matching cover maps a direction ``u`` to a directed matching whose pairs
are stretched along ``u``. :func:`matching` builds one from a max-flow
between the projection extremes; :class:`ProjectionCover` is a flow-free
cover used to exercise the chaining statistics on large point sets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .decomp import PseudoDecomposition, pseudo_decompose, scale_paths
from .directions import as_rng, sample_shuffled, standard_normal
from .graph import Cut, WeightedGraph
from .maxflow import FlowAndCutOutcome, endpoint_sets, flow_and_cut
from .params import Params, chain_correlation


@dataclass
class DirectedMatching:
    """Vertex-disjoint pairs ``(x, y)`` with ``(v_y - v_x) . u >= sigma``.

    When the matching comes from a flow, ``entries[i]`` is the index of the
    path summary that produced ``pairs[i]``.
    """

    pairs: list[tuple[int, int]]
    direction: np.ndarray | None = None
    entries: list[int] = field(default_factory=list)
    outcome: FlowAndCutOutcome | None = None
    decomposition: PseudoDecomposition | None = None

    def __len__(self) -> int:
        return len(self.pairs)

    def as_map(self) -> dict[int, int]:
        return dict(self.pairs)

    def reversed(self, direction: np.ndarray | None = None) -> "DirectedMatching":
        return DirectedMatching([(y, x) for x, y in self.pairs], direction, list(self.entries),
                                self.outcome, self.decomposition)


def greedy_select(candidates: Sequence[tuple[int, int, int]]) -> list[int]:
    """Greedy vertex-disjoint selection.

    ``candidates`` holds ``(priority, x, y)``; larger priority first, ties by
    position. Returns the chosen positions in selection order.
    """
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i][0], i))
    used: set[int] = set()
    chosen = []
    for i in order:
        _, x, y = candidates[i]
        if x in used or y in used:
            continue
        used.add(x)
        used.add(y)
        chosen.append(i)
    return chosen


def matching(graph: WeightedGraph, points: np.ndarray, u: np.ndarray, params: Params,
             edge_lengths: Sequence[float] | None = None,
             vertex_lengths: Sequence[float] | None = None,
             fast: bool = True) -> DirectedMatching | Cut:
    """Flow-based matching for direction ``u``, or the sparse cut that blocks it.

    Paths of the max-flow are discarded when their endpoints are not
    stretched by ``sigma`` along ``u``, when they carry less than
    ``kappa c n / 4m``, when an endpoint has vertex length above ``L/3``, or
    when their length exceeds ``L/3R``. Survivors are matched greedily by
    decreasing flow.
    """
    n = graph.n
    proj = points @ u
    outcome = flow_and_cut(graph, params.kappa, params.c, [float(p) for p in proj])
    if outcome.is_cut:
        return outcome.cut
    lengths = list(edge_lengths) if edge_lengths is not None else [0.0] * graph.m
    wx = vertex_lengths if vertex_lengths is not None else [0.0] * n
    decomposition = pseudo_decompose(outcome.flow, lengths, fast=fast)
    min_flow = Fraction(params.kappa) * Fraction(params.c) * n / (4 * max(graph.m, 1))
    vertex_cap = Fraction(params.L) / 3
    length_cap = Fraction(params.L) / (3 * params.R)
    flow_scale, length_scale = decomposition.flow_scale, decomposition.length_scale
    candidates = []
    positions = []
    for i, e in enumerate(decomposition.entries):
        x, y = e.second, e.penultimate
        if float(proj[y] - proj[x]) < params.sigma:
            continue
        if Fraction(e.flow_units, flow_scale) < min_flow:
            continue
        if Fraction(wx[x]) > vertex_cap or Fraction(wx[y]) > vertex_cap:
            continue
        if Fraction(e.length_units, length_scale) > length_cap:
            continue
        candidates.append((e.flow_units, x, y))
        positions.append(i)
    chosen = greedy_select(candidates)
    pairs = [(candidates[i][1], candidates[i][2]) for i in chosen]
    entries = [positions[i] for i in chosen]
    return DirectedMatching(pairs, u, entries, outcome, decomposition)


def unit_path_flows(m: DirectedMatching, num_edges: int, select: Iterable[int] | None = None,
                    fast: bool = True) -> list[int]:
    """Per-edge count of the paths behind the selected pairs, each scaled to one unit.

    ``select`` lists positions in ``m.pairs``; all pairs by default.
    """
    if m.outcome is None or m.decomposition is None:
        raise ValueError("matching carries no flow to scale")
    picked = range(len(m.pairs)) if select is None else select
    alphas = [Fraction(0)] * len(m.decomposition)
    for k in picked:
        i = m.entries[k]
        alphas[i] = Fraction(1, m.decomposition.entries[i].flow_units)
    scaled = scale_paths(m.outcome.flow, alphas, fast=fast)
    counts = scaled.edge_flows(num_edges)
    out = []
    for v in counts:
        v = Fraction(v)
        if v.denominator != 1:
            raise ArithmeticError("unit path scaling produced a fractional edge count")
        out.append(int(v))
    return out


@dataclass
class CongestionAudit:
    counts: list[int]
    max_congestion: Fraction
    bound: Fraction

    @property
    def ok(self) -> bool:
        return self.max_congestion <= self.bound


def congestion_audit(graph: WeightedGraph, m: DirectedMatching, params: Params,
                     fast: bool = True) -> CongestionAudit:
    """Exact congestion of routing every pair of ``m`` as one unit along its path.

    The bound is ``4m / (kappa c n)`` with ``m`` the edge count of ``graph``.
    """
    counts = unit_path_flows(m, graph.m, fast=fast) if m.pairs else [0] * graph.m
    worst = Fraction(0)
    for (_, _, w), k in zip(graph.edges, counts):
        if k:
            worst = max(worst, Fraction(k) / Fraction(w))
    bound = Fraction(4 * graph.m) / (Fraction(params.kappa) * Fraction(params.c) * graph.n)
    return CongestionAudit(counts, worst, bound)


# -- Chains --------------------------------------------------------------------


@dataclass
class ChainGraph:
    """Composition of ``hops`` matchings; ``walks[x]`` is the vertex sequence from x."""

    n: int
    hops: int
    walks: dict[int, tuple[int, ...]]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return sorted((x, w[-1]) for x, w in self.walks.items())

    def check_degrees(self) -> bool:
        heads = [w[-1] for w in self.walks.values()]
        return len(set(heads)) == len(heads)


def compose_chain(matchings: Sequence[DirectedMatching | dict[int, int]], n: int) -> ChainGraph:
    """Edge ``(x, y)`` iff a walk ``x = x_0 -> x_1 -> ... -> x_R = y`` uses the matchings in order."""
    walks = {x: (x,) for x in range(n)}
    for mt in matchings:
        step = mt if isinstance(mt, dict) else mt.as_map()
        walks = {x: w + (step[w[-1]],) for x, w in walks.items() if w[-1] in step}
    return ChainGraph(n, len(matchings), walks)


# -- Covers --------------------------------------------------------------------


def _is_canonical(u: np.ndarray) -> bool:
    nz = np.flatnonzero(u)
    return nz.size == 0 or u[nz[0]] > 0


class MatchingCover:
    """Skew-symmetric wrapper: ``M(-u)`` is defined as the reversal of ``M(u)``.

    ``base(u)`` is only ever called on directions whose first nonzero
    coordinate is positive.
    """

    def __init__(self, base: Callable[[np.ndarray], DirectedMatching | Cut]):
        self.base = base

    def __call__(self, u: np.ndarray) -> DirectedMatching | Cut:
        if _is_canonical(u):
            return self.base(u)
        out = self.base(-u)
        return out if isinstance(out, Cut) else out.reversed(u)


class ProjectionCover(MatchingCover):
    """Flow-free cover: pair the extremes of the projection from the outside in.

    The ``floor(2cn)`` lowest vertices, in increasing projection order, are
    paired with the ``floor(2cn)`` highest, in decreasing order; pairs whose
    projections differ by less than ``sigma`` are dropped.
    """

    def __init__(self, points: np.ndarray, c: float = 1 / 8, sigma: float = 1 / 4):
        self.points = np.asarray(points, dtype=float)
        self.c = c
        self.sigma = sigma
        super().__init__(self._match)

    def _match(self, u: np.ndarray) -> DirectedMatching:
        proj = self.points @ u
        low, high = endpoint_sets(list(proj), self.c)
        low = sorted(low, key=lambda x: (proj[x], x))
        high = sorted(high, key=lambda x: (-proj[x], x))
        pairs = [(x, y) for x, y in zip(low, high) if proj[y] - proj[x] >= self.sigma]
        return DirectedMatching(pairs, u)


class FlowCover(MatchingCover):
    """Cover given by :func:`matching` under fixed dual lengths."""

    def __init__(self, graph: WeightedGraph, points: np.ndarray, params: Params,
                 edge_lengths=None, vertex_lengths=None, fast: bool = True):
        self.graph = graph
        self.points = np.asarray(points, dtype=float)
        self.params = params
        self.edge_lengths = edge_lengths
        self.vertex_lengths = vertex_lengths
        self.fast = fast
        super().__init__(self._match)

    def _match(self, u: np.ndarray) -> DirectedMatching | Cut:
        return matching(self.graph, self.points, u, self.params, self.edge_lengths,
                        self.vertex_lengths, self.fast)


@dataclass
class CoverStats:
    samples: int = 0
    total_size: int = 0
    stretch_violations: int = 0
    overlap_violations: int = 0
    skew_discrepancy: int = 0

    @property
    def mean_size(self) -> float:
        return self.total_size / self.samples if self.samples else 0.0


def check_matching(points: np.ndarray, m: DirectedMatching, u: np.ndarray,
                   sigma: float) -> tuple[int, int]:
    """(stretch violations, repeated vertices) of a matching."""
    stretch = sum(1 for x, y in m.pairs if float((points[y] - points[x]) @ u) < sigma)
    seen = [v for pr in m.pairs for v in pr]
    return stretch, len(seen) - len(set(seen))


def cover_stats(points: np.ndarray, cover: MatchingCover, sigma: float, samples: int,
                rng, log=None) -> CoverStats:
    """Sample directions in antithetic pairs and audit the cover on both.

    ``log``, if given, receives one JSON line per direction.
    """
    rng = as_rng(rng)
    d = points.shape[1]
    stats = CoverStats()
    for trial in range(samples):
        u = standard_normal(rng, (d,))
        plus, minus = cover(u), cover(-u)
        if isinstance(plus, Cut) or isinstance(minus, Cut):
            raise ValueError("cover returned a cut; cover statistics need matchings")
        for m, direction in ((plus, u), (minus, -u)):
            s, o = check_matching(points, m, direction, sigma)
            stats.samples += 1
            stats.total_size += len(m)
            stats.stretch_violations += s
            stats.overlap_violations += o
            if log is not None:
                log.write(json.dumps({"trial": trial, "sign": 1 if direction is u else -1,
                                      "size": len(m), "stretch_violations": s,
                                      "overlap_violations": o}, sort_keys=True) + "\n")
        stats.skew_discrepancy += len(set(minus.pairs) ^ {(y, x) for x, y in plus.pairs})
    return stats


@dataclass
class PruneResult:
    survivors: list[int]
    out_degree: np.ndarray
    initial_mass: float
    final_mass: float
    removed_order: list[int]


def prune_matchings(samples: Sequence[Sequence[tuple[int, int]]], n: int, delta: float) -> PruneResult:
    """Iteratively drop vertices whose empirical out-degree is below ``delta/4``.

    Out-degree of ``x`` is the fraction of sampled matchings in which ``x``
    has an out-edge to another surviving vertex. When the sample multiset
    is skew-symmetric and the initial mass is at least ``delta n``, at least
    half of it survives; this is checked.
    """
    if not samples:
        raise ValueError("at least one sampled matching is required")
    total = len(samples)
    alive = np.ones(n, dtype=bool)

    def degrees() -> np.ndarray:
        deg = np.zeros(n)
        for pairs in samples:
            for x, y in pairs:
                if alive[x] and alive[y]:
                    deg[x] += 1
        return deg / total

    deg = degrees()
    initial = float(deg.sum())
    removed = []
    while True:
        low = [x for x in range(n) if alive[x] and deg[x] < delta / 4]
        if not low:
            break
        for x in low:
            alive[x] = False
        removed += low
        deg = degrees()
    final = float(deg.sum())
    if initial >= delta * n and final < delta * n / 2 - 1e-12:
        raise ArithmeticError(f"pruning kept mass {final} < delta n / 2 = {delta * n / 2}")
    return PruneResult([x for x in range(n) if alive[x]], deg, initial, final, removed)


def prune_to_uniform(cover: MatchingCover, n: int, d: int, delta: float, budget: int,
                     rng) -> PruneResult:
    """Sample ``budget`` antithetic direction pairs from ``cover`` and prune."""
    if budget <= 0:
        raise ValueError("sample budget must be positive")
    rng = as_rng(rng)
    samples = []
    for _ in range(budget):
        u = standard_normal(rng, (d,))
        for direction in (u, -u):
            m = cover(direction)
            if isinstance(m, Cut):
                raise ValueError("cover returned a cut")
            samples.append(m.pairs)
    return prune_matchings(samples, n, delta)


# -- Long chains ---------------------------------------------------------------


@dataclass
class ChainReport:
    R: int
    rho: float
    counts: list[int]

    @property
    def mean(self) -> float:
        return float(np.mean(self.counts)) if self.counts else 0.0

    @property
    def stderr(self) -> float:
        k = len(self.counts)
        return float(np.std(self.counts, ddof=1) / math.sqrt(k)) if k > 1 else 0.0

    @property
    def positive_fraction(self) -> float:
        return float(np.mean([c > 0 for c in self.counts])) if self.counts else 0.0


def long_pairs(points: np.ndarray, pairs: Iterable[tuple[int, int]], L: float) -> int:
    return sum(1 for x, y in pairs if float(np.sum((points[x] - points[y]) ** 2)) >= L)


def chain_long_edges(points: np.ndarray, cover: MatchingCover, R: int, trials: int,
                      L: float, rng, rho: float | None = None, log=None) -> ChainReport:
    """Mean number of pairs ``(x, y)`` in the composed chain with ``|v_x - v_y|^2 >= L``.

    Chains come from the shuffled sampler with ``R`` hops and correlation
    ``rho`` (default: independent below 7 hops, ``1 - 1/floor(R/7)`` above).
    """
    rng = as_rng(rng)
    rho = chain_correlation(R) if rho is None else rho
    n, d = points.shape
    counts = []
    for trial in range(trials):
        chain = sample_shuffled(d, R, rho, rng)
        ms = []
        for u in chain.vectors:
            m = cover(u)
            if isinstance(m, Cut):
                raise ValueError("cover returned a cut")
            ms.append(m)
        composed = compose_chain(ms, n)
        k = long_pairs(points, composed.pairs, L)
        counts.append(k)
        if log is not None:
            log.write(json.dumps({"trial": trial, "R": R, "hops": len(ms),
                                  "chain_pairs": len(composed.walks), "long_pairs": k},
                                 sort_keys=True) + "\n")
    return ChainReport(R, rho, counts)


def single_direction_baseline(points: np.ndarray, cover: MatchingCover, trials: int,
                              L: float, rng) -> ChainReport:
    """Long pairs of ``M(u)`` for one standard normal ``u`` per trial."""
    rng = as_rng(rng)
    d = points.shape[1]
    counts = []
    for _ in range(trials):
        m = cover(standard_normal(rng, (d,)))
        counts.append(long_pairs(points, m.pairs, L))
    return ChainReport(1, 0.0, counts)
