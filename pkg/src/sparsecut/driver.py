"""Top-level cut-or-expander-flow game, sparsest-cut search and certificates.

The embedding player keeps the bottom nontrivial eigenvectors of the
accumulated demand Laplacian, so heavily demanded pairs are pulled
together; the flow player answers with :func:`find_flow`. The game ends
with a sparse balanced cut or once the averaged demand graph has
algebraic connectivity at least ``lambda_min``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .directions import standard_normal, trial_rng
from .graph import (BRUTE_FORCE_LIMIT, Cut, DemandGraph, WeightedGraph, brute_force_sparsest_cut,
                    cut_stats, fiedler_vector, lambda2)
from .mwu import find_flow, normalize_points
from .params import Params, check_epsilon

CERTIFICATE_VERSION = 1
# Sub-seed tags.
EMBED_STREAM, ORACLE_STREAM = 2, 3


class InconclusiveError(RuntimeError):
    """The game hit its round cap without a cut or a connected enough demand graph."""


@dataclass
class Embedding:
    points: np.ndarray
    fallback: bool = False

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def norm_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.points, axis=1)))


def embedding_dimension(n: int) -> int:
    return max(1, min(n - 1, math.ceil(math.log2(max(n, 2)))))


def update_embedding(history: np.ndarray | None, d: int, rng, n: int | None = None,
                     previous: Embedding | None = None) -> Embedding:
    """Embedding for the next round.

    With no history, Gaussian rows. Otherwise the rows of the bottom ``d``
    eigenvectors of ``history`` orthogonal to the all-ones vector, scaled by
    ``sqrt(n/d)``. Either way ``sum_{x<y} |v_x - v_y|^2 = n^2``. If the
    eigensolve fails the previous embedding is perturbed instead.
    """
    if history is None:
        if n is None:
            raise ValueError("a cold start needs the vertex count")
        return cold_embedding(n, d, rng)
    n = history.shape[0]
    d = min(d, n - 1)
    ones = np.full((n, n), 1.0 / n)
    # Lift the all-ones direction above the spectrum so it is never selected.
    shift = float(np.trace(history)) + 1.0
    try:
        _, vecs = np.linalg.eigh(history + shift * ones)
    except np.linalg.LinAlgError:
        if previous is None:
            raise
        noise = standard_normal(rng, previous.points.shape) * 1e-3
        return Embedding(normalize_points(previous.points + noise), fallback=True)
    basis = vecs[:, :d]
    basis = basis - basis.mean(axis=0)
    return Embedding(normalize_points(basis * math.sqrt(n / d)))


def cold_embedding(n: int, d: int, rng) -> Embedding:
    return Embedding(normalize_points(standard_normal(rng, (n, d))))


# -- Certificates --------------------------------------------------------------


@dataclass
class Certificate:
    """A verified sparse cut or an expander flow routed in ``graph``.

    ``graph_scale`` records the factor the input capacities were multiplied
    by before the game ran; all cut and flow fields refer to the scaled
    graph.
    """

    type: str
    seed: int
    epsilon: float
    kappa: float
    rounds: int
    graph_scale: float = 1.0
    cut_side: list[int] | None = None
    capacity: float | None = None
    expansion: float | None = None
    lambda2: float | None = None
    phi: float | None = None
    congestion: float | None = None
    demands: list[tuple[int, int, float]] | None = None
    edge_flow: list[float] | None = None
    embedding: list[list[float]] | None = None
    final_demands: list[tuple[int, int, float]] | None = None
    trace_path: str | None = None
    version: int = CERTIFICATE_VERSION

    @property
    def is_cut(self) -> bool:
        return self.type == "cut"

    def to_json(self) -> str:
        data = {k: v for k, v in self.__dict__.items() if v is not None}
        return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        data = json.loads(text)
        for key in ("demands", "final_demands"):
            if key in data:
                data[key] = [(int(x), int(y), float(w)) for x, y, w in data[key]]
        return cls(**data)


def cut_certificate(cut: Cut, params: Params, seed: int, rounds: int,
                    graph_scale: float = 1.0) -> Certificate:
    return Certificate("cut", seed, params.epsilon, params.kappa, rounds, graph_scale,
                       cut_side=cut.members(), capacity=cut.capacity, expansion=cut.expansion)


def _pair_list(demands: DemandGraph) -> list[tuple[int, int, float]]:
    return [(x, y, w) for (x, y), w in sorted(demands.pairs.items())]


# -- The game ------------------------------------------------------------------


@dataclass
class GameLog:
    records: list[dict] = field(default_factory=list)

    def add(self, **fields) -> None:
        self.records.append(fields)

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def default_round_cap(params: Params) -> int:
    return max(1, math.ceil(params.beta * math.log(max(params.n, 2))))


def balanced_separator(graph: WeightedGraph, epsilon: float, seed: int,
                       params: Params | None = None, round_cap: int | None = None,
                       fast: bool = True, log: GameLog | None = None,
                       graph_scale: float = 1.0) -> Certificate:
    """Play the game until a sparse balanced cut or an expander flow appears."""
    n = graph.n
    if n < 2:
        raise ValueError("need at least two vertices")
    params = params or Params(n, check_epsilon(n, epsilon))
    comps = graph.components()
    if len(comps) > 1:
        return cut_certificate(cut_stats(graph, comps[0]), params, seed, 0, graph_scale)
    d = embedding_dimension(n)
    cap = round_cap or default_round_cap(params)
    emb = cold_embedding(n, d, trial_rng(seed, EMBED_STREAM))
    history = np.zeros((n, n))
    total_flow = [Fraction(0)] * graph.m
    total_demand = DemandGraph(n)
    for t in range(cap):
        out = find_flow(graph, emb.points, params, _oracle_seed(seed, t), fast)
        if isinstance(out, Cut):
            if log is not None:
                log.add(round=t, outcome="cut", expansion=out.expansion)
            return cut_certificate(out, params, seed, t + 1, graph_scale)
        history += out.demands.laplacian()
        for e, f in enumerate(out.edge_flow):
            total_flow[e] += f
        for k, w in out.demands.pairs.items():
            total_demand.pairs[k] = total_demand.pairs.get(k, 0.0) + w
        lam = lambda2(history / (t + 1))
        if log is not None:
            log.add(round=t, outcome="flow", phi=out.phi, lambda2=lam,
                    congestion=out.congestion, mwu_rounds=out.rounds)
        if lam >= params.lambda_min:
            rounds = t + 1
            demands = total_demand.scaled(1.0 / rounds)
            flow = [f / rounds for f in total_flow]
            congestion = max((float(f / Fraction(w)) for f, (_, _, w) in zip(flow, graph.edges)),
                             default=0.0)
            return Certificate(
                "flow", seed, params.epsilon, params.kappa, rounds, graph_scale,
                lambda2=lam, phi=out.phi, congestion=congestion,
                demands=_pair_list(demands), edge_flow=[float(f) for f in flow],
                embedding=[[float(v) for v in row] for row in normalize_points(emb.points)],
                final_demands=_pair_list(out.demands))
        emb = update_embedding(history, d, trial_rng(seed, EMBED_STREAM, t + 1), previous=emb)
    raise InconclusiveError(f"no cut and lambda2 below {params.lambda_min} after {cap} rounds")


def _oracle_seed(seed: int, t: int) -> int:
    # A 63-bit integer drawn from the (seed, ORACLE_STREAM, t) stream.
    return int(trial_rng(seed, ORACLE_STREAM, t).integers(0, 2**63 - 1))


# -- Sparsest cut --------------------------------------------------------------


@dataclass
class SparsestCutReport:
    cut: Cut
    lower_bound: float
    probes: list[tuple[float, str]]
    certificates: list[Certificate]
    optimum: float | None = None

    @property
    def ratio(self) -> float | None:
        if self.optimum is None:
            return None
        if self.optimum == 0:
            return 1.0 if self.cut.expansion == 0 else math.inf
        return self.cut.expansion / self.optimum


def sparsest_cut(graph: WeightedGraph, epsilon: float, seed: int, steps: int = 10,
                 params: Params | None = None, fast: bool = True,
                 compare: bool = True) -> SparsestCutReport:
    """Binary search on a capacity scale, one game per probe.

    At scale ``alpha`` the game runs on the graph multiplied by
    ``kappa/alpha``: a cut it returns has expansion at most ``alpha`` in the
    input graph, and an expander flow shows every cut has expansion at
    least ``alpha lambda2 / (2 kappa)``. The search starts from
    ``[2 w_min / n, 1.01 W / (c n)]`` and keeps the best cut seen.
    """
    n = graph.n
    if n < 2:
        raise ValueError("need at least two vertices")
    params = params or Params(n, check_epsilon(n, epsilon))
    comps = graph.components()
    if len(comps) > 1 or graph.m == 0:
        cut = cut_stats(graph, comps[0])
        cert = cut_certificate(cut, params, seed, 0)
        return SparsestCutReport(cut, 0.0, [], [cert], _optimum(graph, compare))
    w_min = min(w for _, _, w in graph.edges)
    lo = 2 * w_min / n
    hi = 1.01 * graph.total_weight() / (params.c * n)
    best: Cut | None = None
    lower = 0.0
    probes: list[tuple[float, str]] = []
    certs: list[Certificate] = []

    def probe(alpha: float) -> Certificate:
        factor = params.kappa / alpha
        cert = balanced_separator(graph.scaled(factor), params.epsilon, seed, params,
                                  fast=fast, graph_scale=factor)
        probes.append((alpha, cert.type))
        certs.append(cert)
        return cert

    for alpha in (hi, lo):
        cert = probe(alpha)
        if cert.is_cut:
            cut = cut_stats(graph, cert.cut_side)
            best = cut if best is None or _better(cut, best) else best
        else:
            lower = max(lower, alpha * cert.lambda2 / (2 * params.kappa))
    if best is None:
        raise InconclusiveError("no cut found even at the top of the search range")
    if certs[-1].is_cut:
        # A cut already at the bottom: nothing to search.
        return SparsestCutReport(best, lower, probes, certs, _optimum(graph, compare))
    for _ in range(steps):
        alpha = math.sqrt(lo * hi)
        cert = probe(alpha)
        if cert.is_cut:
            cut = cut_stats(graph, cert.cut_side)
            if _better(cut, best):
                best = cut
            hi = min(alpha, best.expansion) if best.expansion > lo else alpha
        else:
            lower = max(lower, alpha * cert.lambda2 / (2 * params.kappa))
            lo = alpha
    return SparsestCutReport(best, lower, probes, certs, _optimum(graph, compare))


def _better(a: Cut, b: Cut) -> bool:
    return (a.expansion, a.members()) < (b.expansion, b.members())


def _optimum(graph: WeightedGraph, compare: bool) -> float | None:
    if not compare or graph.n > BRUTE_FORCE_LIMIT:
        return None
    return brute_force_sparsest_cut(graph).expansion


# -- Independent verification --------------------------------------------------


@dataclass
class VerifyReport:
    ok: bool
    failures: list[str]
    checks: dict[str, float]

    @property
    def first_failure(self) -> str | None:
        return self.failures[0] if self.failures else None


# Largest linear program (flow variables) the verifier solves; solve time grows
# roughly cubically and passes a second around 12000 variables.
LP_VARIABLE_LIMIT = 8_000


def verify_certificate(graph: WeightedGraph, cert: Certificate, rel_tol: float = 1e-9,
                       lambda_tol: float = 1e-6, lambda_min: float = 0.1,
                       lp_limit: int = LP_VARIABLE_LIMIT) -> VerifyReport:
    """Recheck a certificate against ``graph`` (the unscaled input).

    Cut certificates: crossing capacity, balance and expansion are recomputed
    with exact rational sums. Flow certificates: the demand Laplacian's
    second eigenvalue, the payoff of the final demands against the stored
    embedding, per-edge feasibility of the stored flow, the cut condition
    on every single-vertex cut and every sweep cut of the graph's Fiedler
    vector, and (when it has at most ``lp_limit`` variables) a linear
    program giving the least congestion at which the demands can be routed.
    """
    failures: list[str] = []
    checks: dict[str, float] = {}
    scaled = {(min(u, v), max(u, v)): Fraction(w) * Fraction(cert.graph_scale)
              for u, v, w in graph.edges}
    n = graph.n
    if cert.type == "cut":
        side = set(cert.cut_side or [])
        if not side or len(side) >= n or not side <= set(range(n)):
            return VerifyReport(False, ["cut_side: not a proper subset"], checks)
        cap = sum((w for (u, v), w in scaled.items() if (u in side) != (v in side)), Fraction(0))
        balance = min(len(side), n - len(side))
        expansion = cap / balance
        checks.update(capacity=float(cap), balance=balance, expansion=float(expansion))
        if not _close(float(cap), cert.capacity, rel_tol):
            failures.append(f"capacity: recomputed {float(cap)} vs stored {cert.capacity}")
        if not _close(float(expansion), cert.expansion, rel_tol):
            failures.append(f"expansion: recomputed {float(expansion)} vs stored {cert.expansion}")
        if float(expansion) > cert.kappa * (1 + rel_tol):
            failures.append(f"expansion: {float(expansion)} above kappa {cert.kappa}")
        return VerifyReport(not failures, failures, checks)
    if cert.type != "flow":
        return VerifyReport(False, [f"type: unknown certificate type {cert.type!r}"], checks)
    lap = np.zeros((n, n))
    for x, y, w in cert.demands or []:
        lap[x, x] += w
        lap[y, y] += w
        lap[x, y] -= w
        lap[y, x] -= w
    lam = float(np.linalg.eigvalsh(lap)[1]) if n > 1 else 0.0
    checks["lambda2"] = lam
    if abs(lam - cert.lambda2) > lambda_tol:
        failures.append(f"lambda2: recomputed {lam} vs stored {cert.lambda2}")
    if lam < lambda_min - lambda_tol:
        failures.append(f"lambda2: {lam} below {lambda_min}")
    pts = np.asarray(cert.embedding, dtype=float)
    spread = sum(float(np.sum((pts[x] - pts[y]) ** 2)) for x in range(n) for y in range(x + 1, n))
    numer = sum(w * float(np.sum((pts[x] - pts[y]) ** 2)) for x, y, w in cert.final_demands or [])
    phi = numer * n / spread
    checks["phi"] = phi
    if phi < 1 - 1e-6:
        failures.append(f"phi: {phi} below 1")
    if abs(phi - cert.phi) > 1e-6:
        failures.append(f"phi: recomputed {phi} vs stored {cert.phi}")
    flows = cert.edge_flow or []
    if len(flows) != graph.m:
        failures.append("edge_flow: length differs from edge count")
    else:
        worst = max((f / float(scaled[(min(u, v), max(u, v))]) for (u, v, _), f
                     in zip(graph.edges, flows)), default=0.0)
        checks["stored_congestion"] = worst
        if worst > 1 + rel_tol:
            failures.append(f"edge_flow: congestion {worst} exceeds 1")
    worst_cut = _cut_condition(graph, scaled, cert.demands or [])
    checks["cut_condition"] = worst_cut
    if worst_cut > max(cert.congestion, 0.0) * (1 + 1e-9) + 1e-12:
        failures.append(f"congestion: some cut carries {worst_cut} times its capacity in demand")
    lp = min_congestion(n, scaled, cert.demands or [], lp_limit)
    checks["lp_solved"] = float(lp is not None)
    if lp is not None:
        checks["lp_congestion"] = lp
        if lp > max(cert.congestion, 0.0) * (1 + 1e-6) + 1e-9:
            failures.append(f"congestion: demands need {lp} > stored {cert.congestion}")
        if lp > 1 + 1e-6:
            failures.append(f"congestion: demands are not routable ({lp})")
    return VerifyReport(not failures, failures, checks)


def _close(a: float, b: float | None, rel_tol: float) -> bool:
    return b is not None and abs(a - b) <= rel_tol * max(1.0, abs(a), abs(b))


def _cut_condition(graph: WeightedGraph, capacity: dict[tuple[int, int], Fraction],
                   demands: list[tuple[int, int, float]]) -> float:
    """Largest demand-to-capacity ratio over single-vertex and Fiedler sweep cuts."""
    n = graph.n
    sides = [[x] for x in range(n)]
    if n > 2:
        order = np.argsort(fiedler_vector(graph.laplacian()), kind="stable")
        sides += [list(order[:k]) for k in range(2, n - 1)]
    worst = 0.0
    for side in sides:
        inside = set(int(x) for x in side)
        cap = sum((w for (u, v), w in capacity.items() if (u in inside) != (v in inside)),
                  Fraction(0))
        need = math.fsum(w for x, y, w in demands if (x in inside) != (y in inside))
        if need > 0:
            worst = max(worst, need / float(cap)) if cap > 0 else math.inf
    return worst


def min_congestion(n: int, capacity: dict[tuple[int, int], Fraction],
                   demands: list[tuple[int, int, float]],
                   limit: int = LP_VARIABLE_LIMIT) -> float | None:
    """Least ``lam`` such that the demands route with every edge flow at most ``lam`` times capacity.

    Commodities are grouped by their smaller endpoint. Returns None when the
    program would have more than ``limit`` flow variables.
    """
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    if not demands:
        return 0.0
    edges = sorted(capacity)
    sources = sorted({min(x, y) for x, y, _ in demands})
    m = len(edges)
    nvar = len(sources) * 2 * m + 1
    if nvar > limit:
        return None
    rows, cols, vals = [], [], []
    b_eq = np.zeros(len(sources) * n)
    for k, s in enumerate(sources):
        base = k * 2 * m
        for j, (u, v) in enumerate(edges):
            # variable base+2j: u->v, base+2j+1: v->u
            for var, a, b in ((base + 2 * j, u, v), (base + 2 * j + 1, v, u)):
                rows += [k * n + a, k * n + b]
                cols += [var, var]
                vals += [1.0, -1.0]
    for x, y, w in demands:
        s, t = min(x, y), max(x, y)
        k = sources.index(s)
        b_eq[k * n + s] += w
        b_eq[k * n + t] -= w
    a_eq = coo_matrix((vals, (rows, cols)), shape=(len(sources) * n, nvar)).tocsr()
    rows, cols, vals = [], [], []
    for j, (u, v) in enumerate(edges):
        for k in range(len(sources)):
            rows += [j, j]
            cols += [k * 2 * m + 2 * j, k * 2 * m + 2 * j + 1]
            vals += [1.0, 1.0]
        rows.append(j)
        cols.append(nvar - 1)
        vals.append(-float(capacity[(u, v)]))
    a_ub = coo_matrix((vals, (rows, cols)), shape=(m, nvar)).tocsr()
    cost = np.zeros(nvar)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        return math.inf
    return float(res.x[-1])
