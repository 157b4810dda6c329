"""Cut-matching game simulator.

A cut player names bisections, a matching player answers with perfect
matchings, and the accumulated multigraph ``H`` is tracked together with
the potential: the mean Rayleigh quotient of the embedding's coordinate
columns against ``L_H``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .decomp import pseudo_decompose
from .directions import as_rng, standard_normal
from .graph import Cut, WeightedGraph, cut_stats, fiedler_vector
from .maxflow import attach_terminals, max_flow

Bisection = tuple[tuple[int, ...], tuple[int, ...]]
MatchingPlayer = Callable[[Bisection], "list[tuple[int, int]] | Cut"]


class ConstructionError(RuntimeError):
    """The sampled point set is not a maximal separated net."""


# -- Cut player ----------------------------------------------------------------


def _split(values: Sequence[float]) -> Bisection:
    n = len(values)
    if n % 2:
        raise ValueError("bisections need an even number of vertices")
    order = sorted(range(n), key=lambda x: (values[x], x))
    return tuple(sorted(order[: n // 2])), tuple(sorted(order[n // 2:]))


def cut_player_bisection(laplacian: np.ndarray, rng) -> Bisection:
    """Lower half of the vertices by the Fiedler vector of ``laplacian``, ties by id.

    With an empty ``laplacian`` the values are a random Gaussian projection.
    """
    n = laplacian.shape[0]
    if not np.any(laplacian):
        return _split(list(standard_normal(as_rng(rng), (n,))))
    return _split(list(fiedler_vector(laplacian)))


# -- Matching players ----------------------------------------------------------


def flow_matching_player(graph: WeightedGraph, bisection: Bisection) -> list[tuple[int, int]] | Cut:
    """Route one unit from every vertex of one side to the other.

    Returns a perfect matching ``(x, y)``, ``x`` in the first side, when the
    flow saturates, else the min cut, which has expansion below one.
    Capacities must be integers.
    """
    S, T = bisection
    n = graph.n
    if len(S) != len(T) or len(S) + len(T) != n:
        raise ValueError("not a bisection")
    if any(w != int(w) for _, _, w in graph.edges):
        raise ValueError("flow matching needs integral capacities")
    net, *_ = attach_terminals(graph, S, T, 1.0)
    result = max_flow(net)
    if result.value_units * 2 < n * net.scale:
        return cut_stats(graph, [x for x in result.cut_side if x < n])
    decomposition = pseudo_decompose(result)
    pairs = sorted((e.second, e.penultimate) for e in decomposition.entries)
    if len(pairs) != len(S) or any(e.flow_units != net.scale for e in decomposition.entries):
        raise ArithmeticError("saturating integral flow did not split into unit paths")
    return pairs


def greedy_match(points: np.ndarray, S: Sequence[int], T: Sequence[int]) -> tuple[list[tuple[int, int]], float]:
    """Repeatedly match the closest remaining pair across the bisection.

    Ties go to the lexicographically smallest ``(x, y)`` with ``x`` in ``S``.
    Returns the matching and its total squared length.
    """
    if len(S) != len(T):
        raise ValueError("sides must have equal size")
    pts = np.asarray(points, dtype=float)
    S, T = list(S), list(T)
    if not S:
        return [], 0.0
    diff = pts[S][:, None, :] - pts[T][None, :, :]
    dist = np.sum(diff * diff, axis=2)
    si, ti = np.meshgrid(np.array(S), np.array(T), indexing="ij")
    order = np.lexsort((ti.ravel(), si.ravel(), dist.ravel()))
    used_s, used_t = set(), set()
    pairs = []
    costs = []
    flat = dist.ravel()
    cols = len(T)
    for k in order:
        i, j = divmod(int(k), cols)
        if i in used_s or j in used_t:
            continue
        used_s.add(i)
        used_t.add(j)
        pairs.append((S[i], T[j]))
        costs.append(float(flat[k]))
        if len(pairs) == len(S):
            break
    return pairs, math.fsum(costs)


def embedding_player(points: np.ndarray) -> MatchingPlayer:
    def play(bisection: Bisection):
        pairs, _ = greedy_match(points, *bisection)
        return pairs
    return play


# -- Point sets ----------------------------------------------------------------


def hypercube_points(d: int) -> np.ndarray:
    """Vertices of ``{-1/sqrt d, +1/sqrt d}^d``; row ``x`` has coordinate i positive iff bit i of x is set."""
    n = 1 << d
    bits = (np.arange(n)[:, None] >> np.arange(d)[None, :]) & 1
    return (2.0 * bits - 1.0) / math.sqrt(d)


@dataclass
class LowerBoundEmbedding:
    points: np.ndarray
    gamma: float
    radius: float = math.nan
    second_moment_floor: float = math.nan
    expansion_factor: float = math.nan

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def columns(self) -> np.ndarray:
        return self.points.T


def sphere_point_set(d: int, density: float = 1.0, rng=0, samples: int = 40_000,
                     test_sets: int = 200) -> LowerBoundEmbedding:
    """Antipodally closed separated net on the unit sphere.

    Uniform samples are kept greedily when they lie at distance at least
    ``gamma = density / sqrt d`` from every kept point and its antipode;
    the result is the kept set together with its negation. Raises
    :class:`ConstructionError` if the net was still growing in the last
    tenth of the samples. Second moments and the expansion radius are
    measured with :func:`measure_embedding`.
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")
    rng = as_rng(rng)
    gamma = density / math.sqrt(d)
    cand = standard_normal(rng, (samples, d))
    cand /= np.linalg.norm(cand, axis=1)[:, None]
    # For unit vectors, |v - k| >= gamma and |v + k| >= gamma iff |v . k| <= 1 - gamma^2 / 2.
    limit = 1 - gamma * gamma / 2
    kept: list[np.ndarray] = []
    late = 0
    chunk = 1000
    for start in range(0, samples, chunk):
        block = cand[start:start + chunk]
        if kept:
            far = np.max(np.abs(block @ np.array(kept).T), axis=1) <= limit
            block = block[far]
        fresh: list[np.ndarray] = []
        for v in block:
            if fresh and np.max(np.abs(np.array(fresh) @ v)) > limit:
                continue
            fresh.append(v)
        kept += fresh
        if start + chunk > samples * 9 // 10:
            late += len(fresh)
    kept = np.array(kept)
    if late > 0.01 * samples / 10:
        raise ConstructionError(f"net still growing at gamma={gamma:.4f}: {late} late additions")
    points = np.concatenate([kept, -kept])
    emb = LowerBoundEmbedding(points, gamma)
    measure_embedding(emb, rng, test_sets)
    return emb


def sphere_point_set_of_size(d: int, target: int, rng=0, samples: int = 40_000,
                             test_sets: int = 200) -> LowerBoundEmbedding:
    """:func:`sphere_point_set` with the density bisected to get close to ``target`` points."""
    lo, hi = 0.05, 4.0
    best = None
    for _ in range(18):
        mid = math.sqrt(lo * hi)
        try:
            emb = sphere_point_set(d, mid, rng, samples, test_sets=0)
        except ConstructionError:
            lo = mid
            continue
        if best is None or abs(emb.n - target) < abs(best.n - target):
            best = emb
        if emb.n > target:
            lo = mid
        elif emb.n < target:
            hi = mid
        else:
            break
    if best is None:
        raise ConstructionError(f"no saturated net near {target} points in dimension {d}")
    measure_embedding(best, as_rng(rng), test_sets)
    return best


def expansion_radius(points: np.ndarray, members: np.ndarray, factor: float = 1 + 1 / 12) -> float:
    """Least squared radius ``r`` with ``|Ball[A; sqrt r]| >= factor |A|``."""
    inside = np.zeros(points.shape[0], dtype=bool)
    inside[members] = True
    outside = points[~inside]
    need = math.ceil((factor - 1) * members.size - 1e-12)
    if need <= 0:
        return 0.0
    diff = outside[:, None, :] - points[members][None, :, :]
    nearest = np.min(np.sum(diff * diff, axis=2), axis=1)
    return float(np.sort(nearest)[need - 1])


def measure_embedding(emb: LowerBoundEmbedding, rng, test_sets: int = 200) -> None:
    """Fill in the second-moment floor and the measured expansion radius.

    Test sets are caps ``{x : v_x . a >= q}`` for random ``a`` and sizes up
    to ``n/2``, the extremal sets for spherical isoperimetry, plus uniformly
    random subsets.
    """
    pts = emb.points
    n, d = pts.shape
    emb.second_moment_floor = float(np.min(np.sum(pts * pts, axis=0)))
    if test_sets <= 0:
        return
    rng = as_rng(rng)
    worst = 0.0
    for k in range(test_sets):
        size = int(rng.integers(1, n // 2 + 1))
        if k % 4 == 3:
            members = rng.choice(n, size=size, replace=False)
        else:
            a = standard_normal(rng, (d,))
            members = np.argsort(-(pts @ a), kind="stable")[:size]
        worst = max(worst, expansion_radius(pts, np.asarray(members)))
    emb.radius = worst
    emb.expansion_factor = 1 + 1 / 12


# -- The game ------------------------------------------------------------------


@dataclass
class GameState:
    n: int
    adjacency: np.ndarray
    t: int = 0
    matchings: list[list[tuple[int, int]]] = field(default_factory=list)
    psi: list[float] = field(default_factory=lambda: [0.0])
    lambda2: list[float] = field(default_factory=lambda: [0.0])
    increments: list[float] = field(default_factory=list)
    bounds: list[float] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    cut: Cut | None = None

    @property
    def laplacian(self) -> np.ndarray:
        return np.diag(self.adjacency.sum(axis=1)) - self.adjacency

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "psi", "lambda2", "increment", "matching_cost"])
        for t in range(1, len(self.increments) + 1):
            writer.writerow([t, repr(self.psi[t]), repr(self.lambda2[t]),
                             repr(self.increments[t - 1]), repr(self.costs[t - 1])])
        return buf.getvalue()


def rayleigh_potential(columns: np.ndarray, laplacian: np.ndarray) -> float:
    """Mean over coordinate columns ``w`` of ``w' L w / w' w``."""
    vals = [float(w @ laplacian @ w) / float(w @ w) for w in columns]
    return math.fsum(vals) / len(vals)


def run_game(n: int, matching_player: MatchingPlayer, T: int, rng=0,
             points: np.ndarray | None = None,
             cut_player: Callable[[np.ndarray, object], Bisection] = cut_player_bisection,
             first_bisection: Bisection | None = None) -> GameState:
    """Play up to ``T`` rounds.

    When ``points`` are given the potential is tracked: each round's
    increment is checked against ``(1 / dL) sum |v_x - v_y|^2`` with ``L``
    the smallest squared column norm, and, if the points sum to zero,
    ``lambda2(L_H) <= psi + 1e-6`` is checked too. A matching player that
    answers with a cut ends the game.
    """
    if T < 0:
        raise ValueError("round count must be non-negative")
    rng = as_rng(rng)
    state = GameState(n, np.zeros((n, n)))
    cols = None
    centered = False
    if points is not None:
        pts = np.asarray(points, dtype=float)
        cols = pts.T
        floor = float(np.min(np.sum(pts * pts, axis=0)))
        d = pts.shape[1]
        centered = bool(np.all(np.abs(pts.sum(axis=0)) <= 1e-9 * max(1.0, n)))
    for t in range(1, T + 1):
        if t == 1 and first_bisection is not None:
            bisection = first_bisection
        else:
            bisection = cut_player(state.laplacian, rng)
        answer = matching_player(bisection)
        if isinstance(answer, Cut):
            state.cut = answer
            break
        pairs = list(answer)
        matched = [v for pr in pairs for v in pr]
        if len(matched) != n or len(set(matched)) != n:
            raise ValueError(f"round {t}: matching player did not return a perfect matching")
        for x, y in pairs:
            state.adjacency[x, y] += 1
            state.adjacency[y, x] += 1
        state.t = t
        state.matchings.append(pairs)
        lap = state.laplacian
        lam = float(np.linalg.eigvalsh(lap)[1]) if n > 1 else 0.0
        state.lambda2.append(lam)
        if cols is not None:
            cost = math.fsum(float(np.sum((pts[x] - pts[y]) ** 2)) for x, y in pairs)
            match_lap = np.zeros((n, n))
            for x, y in pairs:
                match_lap[x, x] += 1
                match_lap[y, y] += 1
                match_lap[x, y] -= 1
                match_lap[y, x] -= 1
            increment = rayleigh_potential(cols, match_lap)
            bound = cost / (d * floor)
            if increment > bound * (1 + 1e-12) + 1e-15:
                raise ArithmeticError(f"round {t}: potential increment {increment} above {bound}")
            psi = rayleigh_potential(cols, lap)
            if centered and lam > psi + 1e-6:
                raise ArithmeticError(f"round {t}: lambda2 {lam} above potential {psi}")
            state.psi.append(psi)
            state.increments.append(increment)
            state.bounds.append(bound)
            state.costs.append(cost)
        else:
            state.psi.append(math.nan)
            state.increments.append(math.nan)
            state.bounds.append(math.nan)
            state.costs.append(math.nan)
        if np.any(state.degrees() != t):
            raise ArithmeticError(f"round {t}: accumulated graph is not {t}-regular")
    return state


def default_sphere_dimension(n: int) -> int:
    ln = math.log(max(n, 3))
    return max(2, math.ceil(ln / math.log(ln))) if ln > 1 else 2
