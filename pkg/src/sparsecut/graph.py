"""Weighted undirected graphs, cut arithmetic and spectral helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised for malformed graphs or invalid cut requests."""


class NumericError(ArithmeticError):
    """An iterative eigensolve failed to converge.

    The best estimate reached so far is kept in ``estimate``.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class EdgeListParseError(GraphError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# Dense eigensolves below this size, Lanczos above.
DENSE_EIGEN_LIMIT = 512
BRUTE_FORCE_LIMIT = 24


class WeightedGraph:
    """Immutable undirected capacitated graph on vertices ``0..n-1``.

    Edges are stored in insertion order; edge ``i`` is ``edges[i] = (u, v, w)``
    with ``u < v``. ``adj[x]`` lists ``(neighbor, edge_id)`` pairs.
    """

    __slots__ = ("n", "edges", "adj", "_index")

    def __init__(self, n: int, edges: Iterable[tuple[int, int, float]] = ()):
        if n < 0:
            raise GraphError("vertex count must be non-negative")
        self.n = int(n)
        normalized: list[tuple[int, int, float]] = []
        index: dict[tuple[int, int], int] = {}
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={self.n}")
            if not (w > 0.0) or not math.isfinite(w):
                raise GraphError(f"edge ({u}, {v}) has non-positive capacity {w}")
            key = (min(u, v), max(u, v))
            if key in index:
                raise GraphError(f"duplicate edge {key}")
            index[key] = len(normalized)
            adj[key[0]].append((key[1], len(normalized)))
            adj[key[1]].append((key[0], len(normalized)))
            normalized.append((key[0], key[1], w))
        self.edges: tuple[tuple[int, int, float], ...] = tuple(normalized)
        self.adj: tuple[tuple[tuple[int, int], ...], ...] = tuple(tuple(a) for a in adj)
        self._index = index

    @property
    def m(self) -> int:
        return len(self.edges)

    def weight(self, u: int, v: int) -> float:
        eid = self._index.get((min(u, v), max(u, v)))
        return 0.0 if eid is None else self.edges[eid][2]

    def edge_id(self, u: int, v: int) -> int | None:
        return self._index.get((min(u, v), max(u, v)))

    def degree(self, x: int) -> float:
        return sum(self.edges[e][2] for _, e in self.adj[x])

    def total_weight(self) -> float:
        return math.fsum(w for _, _, w in self.edges)

    def scaled(self, factor: float) -> "WeightedGraph":
        if not factor > 0:
            raise GraphError("scale factor must be positive")
        return WeightedGraph(self.n, ((u, v, w * factor) for u, v, w in self.edges))

    def components(self) -> list[list[int]]:
        seen = [False] * self.n
        comps = []
        for root in range(self.n):
            if seen[root]:
                continue
            seen[root] = True
            stack, comp = [root], []
            while stack:
                x = stack.pop()
                comp.append(x)
                for y, _ in self.adj[x]:
                    if not seen[y]:
                        seen[y] = True
                        stack.append(y)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return self.n <= 1 or len(self.components()) == 1

    def laplacian(self) -> np.ndarray:
        return laplacian_from_pairs(self.n, self.edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.n == other.n and sorted(self.edges) == sorted(other.edges)

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class Cut:
    """A proper cut ``(S, complement)`` with its recomputable statistics."""

    side: frozenset[int]
    n: int
    capacity: float
    balance: int
    expansion: float

    def members(self) -> list[int]:
        return sorted(self.side)

    def complement(self) -> frozenset[int]:
        return frozenset(range(self.n)) - self.side


@dataclass
class DemandGraph:
    """Symmetric nonnegative demands, stored once per unordered pair ``x < y``."""

    n: int
    pairs: dict[tuple[int, int], float] = field(default_factory=dict)

    def add(self, x: int, y: int, amount: float) -> None:
        if x == y:
            raise GraphError("demand between a vertex and itself")
        if amount < 0:
            raise GraphError("negative demand")
        key = (x, y) if x < y else (y, x)
        self.pairs[key] = self.pairs.get(key, 0.0) + amount

    def get(self, x: int, y: int) -> float:
        return self.pairs.get((x, y) if x < y else (y, x), 0.0)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n)
        for (x, y), w in self.pairs.items():
            deg[x] += w
            deg[y] += w
        return deg

    def scaled(self, factor: float) -> "DemandGraph":
        return DemandGraph(self.n, {k: w * factor for k, w in self.pairs.items()})

    def total(self) -> float:
        return math.fsum(self.pairs.values())

    def laplacian(self) -> np.ndarray:
        return laplacian_from_pairs(self.n, ((x, y, w) for (x, y), w in self.pairs.items()))

    @staticmethod
    def average(graphs: Sequence["DemandGraph"]) -> "DemandGraph":
        if not graphs:
            raise GraphError("cannot average an empty list of demand graphs")
        out = DemandGraph(graphs[0].n)
        for g in graphs:
            for k, w in g.pairs.items():
                out.pairs[k] = out.pairs.get(k, 0.0) + w
        return out.scaled(1.0 / len(graphs))


def laplacian_from_pairs(n: int, pairs: Iterable[tuple[int, int, float]]) -> np.ndarray:
    lap = np.zeros((n, n))
    for u, v, w in pairs:
        lap[u, v] -= w
        lap[v, u] -= w
        lap[u, u] += w
        lap[v, v] += w
    return lap


def cut_stats(graph: WeightedGraph, side: Iterable[int]) -> Cut:
    """Capacity, balance and edge expansion of the cut with one side ``side``."""
    members = frozenset(int(x) for x in side)
    if any(x < 0 or x >= graph.n for x in members):
        raise GraphError("cut side contains a vertex outside the graph")
    if not 1 <= len(members) <= graph.n - 1:
        raise GraphError(f"invalid cut: |S|={len(members)} for n={graph.n}")
    capacity = math.fsum(w for u, v, w in graph.edges if (u in members) != (v in members))
    balance = min(len(members), graph.n - len(members))
    return Cut(members, graph.n, capacity, balance, capacity / balance)


def lambda2(laplacian: np.ndarray, tol: float = 1e-9, max_iter: int = 10_000) -> float:
    """Second smallest eigenvalue of a graph Laplacian.

    The all-ones direction is projected out, so for disconnected graphs the
    result is (numerically) zero. Dense ``eigvalsh`` is used up to
    ``DENSE_EIGEN_LIMIT`` vertices and Lanczos with deflation beyond.
    """
    lap = np.asarray(laplacian, dtype=float)
    n = lap.shape[0]
    if n == 0:
        raise GraphError("empty graph has no spectrum")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n == 1:
        return 0.0
    if n <= DENSE_EIGEN_LIMIT:
        basis = _ones_complement_basis(n)
        restricted = basis.T @ lap @ basis
        return float(np.linalg.eigvalsh((restricted + restricted.T) / 2)[0])
    return _lambda2_lanczos(lap, tol, max_iter)


def _ones_complement_basis(n: int) -> np.ndarray:
    # Orthonormal basis of the subspace orthogonal to the all-ones vector.
    q, _ = np.linalg.qr(np.eye(n, n - 1) - 1.0 / n)
    return q


def _lambda2_lanczos(lap: np.ndarray, tol: float, max_iter: int) -> float:
    from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

    n = lap.shape[0]
    ones = np.full(n, 1.0 / math.sqrt(n))

    def matvec(x: np.ndarray) -> np.ndarray:
        x = x - ones * (ones @ x)
        y = lap @ x
        # Shift the ones direction far above the spectrum so it is never the minimum.
        return y - ones * (ones @ y) + ones * (ones @ x) * shift

    shift = 2.0 * float(np.abs(lap).sum(axis=1).max()) + 1.0
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    try:
        vals = eigsh(op, k=1, which="SA", tol=tol, maxiter=max_iter, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        best = float(min(exc.eigenvalues)) if len(exc.eigenvalues) else float("nan")
        raise NumericError("lambda2 did not converge", best) from exc
    return float(vals[0])


def fiedler_vector(laplacian: np.ndarray) -> np.ndarray:
    """Unit eigenvector for the second smallest eigenvalue (orthogonal to ones)."""
    n = laplacian.shape[0]
    basis = _ones_complement_basis(n)
    restricted = basis.T @ laplacian @ basis
    _, vecs = np.linalg.eigh((restricted + restricted.T) / 2)
    return basis @ vecs[:, 0]


def brute_force_sparsest_cut(graph: WeightedGraph) -> Cut:
    """Exact sparsest cut by enumerating all ``2**(n-1) - 1`` proper cuts.

    The last vertex is pinned to the complement so every cut is seen once.
    Ties resolve to the lexicographically smallest membership bitset
    (read from vertex 0 upwards).
    """
    n = graph.n
    if n > BRUTE_FORCE_LIMIT:
        raise GraphError(f"brute force limited to n <= {BRUTE_FORCE_LIMIT}, got {n}")
    if n < 2:
        raise GraphError("a graph needs at least two vertices to have a cut")
    free = n - 1
    shifts = np.arange(free, dtype=np.int64)
    best_val = math.inf
    best_rows: list[tuple[int, ...]] = []
    chunk = 1 << 16
    for lo in range(1, 1 << free, chunk):
        masks = np.arange(lo, min(lo + chunk, 1 << free), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(bool)
        bits = np.concatenate([bits, np.zeros((len(masks), 1), dtype=bool)], axis=1)
        sizes = bits.sum(axis=1)
        capacity = np.zeros(len(masks))
        for u, v, w in graph.edges:
            capacity += w * (bits[:, u] != bits[:, v])
        expansion = capacity / np.minimum(sizes, n - sizes)
        low = expansion.min()
        if low > best_val:
            continue
        if low < best_val:
            best_val, best_rows = low, []
        for i in np.flatnonzero(expansion == low):
            best_rows.append(tuple(int(b) for b in bits[i]))
    chosen = min(best_rows)
    return cut_stats(graph, [x for x in range(n) if chosen[x]])


def embedding_spread(points: np.ndarray) -> float:
    """``sum_{x<y} ||v_x - v_y||^2`` computed via the centroid identity."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    centered = pts - pts.mean(axis=0)
    return float(n * np.sum(centered * centered))


def payoff_phi(points: np.ndarray, demands: DemandGraph) -> float:
    """Flow player's payoff: demand-weighted squared distance over mean spread."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    spread = embedding_spread(pts)
    if not spread > 0:
        raise GraphError("degenerate embedding: all points coincide")
    numer = math.fsum(w * float(np.sum((pts[x] - pts[y]) ** 2)) for (x, y), w in demands.pairs.items())
    return numer / (spread / n)


def read_edge_list(text: str) -> WeightedGraph:
    """Parse ``u v w`` lines (0-indexed, ``#`` comments).

    An optional header ``# n <count>`` fixes the vertex count so isolated
    trailing vertices survive a round trip; otherwise ``n`` is one more than
    the largest id seen. Errors carry 1-based line numbers.
    """
    edges: list[tuple[int, int, float]] = []
    seen: dict[tuple[int, int], int] = {}
    declared_n: int | None = None
    max_id = -1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "n":
                try:
                    declared_n = int(parts[1])
                except ValueError:
                    raise EdgeListParseError(line_no, f"bad vertex count {parts[1]!r}") from None
            continue
        line = line.split("#", 1)[0]
        parts = line.split()
        if len(parts) != 3:
            raise EdgeListParseError(line_no, f"expected 'u v w', got {raw.strip()!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2])
        except ValueError:
            raise EdgeListParseError(line_no, f"non-numeric field in {raw.strip()!r}") from None
        if u < 0 or v < 0:
            raise EdgeListParseError(line_no, "negative vertex id")
        if u == v:
            raise EdgeListParseError(line_no, f"self-loop at vertex {u}")
        if not (w > 0) or not math.isfinite(w):
            raise EdgeListParseError(line_no, f"capacity must be positive, got {parts[2]}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise EdgeListParseError(line_no, f"duplicate pair {key} (first on line {seen[key]})")
        seen[key] = line_no
        edges.append((u, v, w))
        max_id = max(max_id, u, v)
    n = max_id + 1 if declared_n is None else declared_n
    if declared_n is not None and max_id >= declared_n:
        raise GraphError(f"vertex id {max_id} exceeds declared n={declared_n}")
    return WeightedGraph(n, edges)


def write_edge_list(graph: WeightedGraph) -> str:
    lines = [f"# n {graph.n}"]
    lines.extend(f"{u} {v} {w!r}" for u, v, w in graph.edges)
    return "\n".join(lines) + "\n"


def load_graph(path: str) -> WeightedGraph:
    with open(path, encoding="utf-8") as fh:
        return read_edge_list(fh.read())


def save_graph(graph: WeightedGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_edge_list(graph))
