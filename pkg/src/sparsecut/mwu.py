"""Multiplicative weights for packing constraints, and the flow player built on it.

:func:`generic_mwu` drives an oracle against constraints ``Ax <= b``.
:func:`find_flow` uses it with one constraint per edge (flow at most the
capacity) and one per vertex (demand degree at most ``beta``); each oracle
call is :func:`flow_player_round`, which routes long matched pairs along
short paths under the current dual lengths.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .directions import sample_shuffled, standard_normal, trial_rng
from .graph import Cut, DemandGraph, WeightedGraph, embedding_spread, payoff_phi
from .maxflow import flow_and_cut
from .matching import CongestionAudit, FlowCover, congestion_audit, compose_chain, unit_path_flows
from .params import Params

# Sub-seed tags for the random streams of one oracle call.
PROBE_STREAM, ROUND_STREAM = 0, 1


class OracleFault(RuntimeError):
    """The oracle broke its contract (width or weighted feasibility)."""

    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class OracleStarvation(RuntimeError):
    """A round used its whole trial budget without collecting enough long pairs."""


class MwuError(ArithmeticError):
    """The averaged solution missed the guaranteed bound."""


@dataclass(frozen=True)
class MwuConfig:
    eta: float
    width: float
    num_constraints: int
    iterations: int | None = None

    def __post_init__(self):
        if not 0 < self.eta < 0.5:
            raise ValueError("eta must lie in (0, 1/2)")
        if not self.width > 0:
            raise ValueError("width must be positive")

    @property
    def T(self) -> int:
        if self.iterations is not None:
            return max(1, self.iterations)
        logm = math.log(max(self.num_constraints, 2))
        return max(1, math.ceil(self.width * logm / (self.eta * self.eta)))


@dataclass
class MwuOutcome:
    solutions: list
    average_rows: np.ndarray
    weights: np.ndarray
    iterations: int
    measured_width: float
    max_ratio: float


def generic_mwu(oracle: Callable[[np.ndarray, int], object],
                rows: Callable[[object], np.ndarray],
                b: Sequence[float], config: MwuConfig,
                stop: Callable[[int, np.ndarray], bool] | None = None) -> MwuOutcome:
    """Multiplicative weights on ``Ax <= b`` with an oracle of width ``config.width``.

    ``oracle(y, t)`` returns ``x`` with ``0 <= Ax <= width b`` and
    ``y.Ax <= y.b``; ``rows(x)`` evaluates ``Ax``. After ``config.T``
    iterations, or earlier once ``stop(t, average Ax)`` holds, the average
    satisfies ``A x_avg <= (1 + 4 eta) b``; that bound is checked.
    """
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise ValueError("right-hand side must be positive")
    y = np.ones_like(b)
    width, eta = config.width, config.eta
    total = np.zeros_like(b)
    solutions = []
    measured = 0.0
    t = 0
    while t < config.T:
        x = oracle(y.copy(), t)
        ax = np.asarray(rows(x), dtype=float)
        ratio = float(np.max(ax / b)) if ax.size else 0.0
        if np.any(ax < 0):
            raise OracleFault(t, "negative constraint activity")
        if ratio > width:
            raise OracleFault(t, f"activity {ratio:.6g} times the bound exceeds width {width:.6g}")
        lhs, rhs = float(y @ ax), float(y @ b)
        if lhs > rhs * (1 + 1e-12):
            raise OracleFault(t, f"weighted activity {lhs:.12g} exceeds weighted bound {rhs:.12g}")
        measured = max(measured, ratio)
        y = y * (1 + eta * ax / (width * b))
        if y.max() > 1e100:
            y /= y.max()
        total += ax
        solutions.append(x)
        t += 1
        if stop is not None and stop(t, total / t):
            break
    average = total / t
    if np.any(average > (1 + 4 * eta) * b * (1 + 1e-12)):
        raise MwuError(f"averaged activity {float(np.max(average / b)):.6g} times the bound "
                       f"exceeds 1 + 4 eta = {1 + 4 * eta}")
    ratio = float(np.max(average / b)) if b.size else 0.0
    return MwuOutcome(solutions, average, y, t, measured, ratio)


# -- Dual lengths --------------------------------------------------------------


@dataclass
class DualState:
    """Edge lengths ``w_e`` and vertex lengths ``w_x``.

    After :meth:`normalize`, ``sum_e w_e G_e + beta sum_x w_x = 2n``.
    """

    edge: np.ndarray
    vertex: np.ndarray
    beta: float
    capacity: np.ndarray

    @classmethod
    def from_weights(cls, graph: WeightedGraph, beta: float, y: np.ndarray) -> "DualState":
        cap = np.array([w for _, _, w in graph.edges], dtype=float)
        out = cls(np.array(y[:graph.m], dtype=float), np.array(y[graph.m:], dtype=float), beta, cap)
        out.normalize()
        return out

    def mass(self) -> float:
        return math.fsum(self.edge * self.capacity) + self.beta * math.fsum(self.vertex)

    def normalize(self) -> None:
        n = self.vertex.size
        factor = 2 * n / self.mass()
        self.edge = self.edge * factor
        self.vertex = self.vertex * factor

    def normalization_error(self) -> float:
        n = self.vertex.size
        return abs(self.mass() - 2 * n) / (2 * n)


# -- One oracle round ----------------------------------------------------------


@dataclass
class RoundResult:
    """A flow routing long pairs, scaled to objective ``2n``.

    ``pair_counts`` holds the unit demands before scaling and
    ``edge_counts`` the unit path counts per edge; the scaled demand and
    flow are ``scale`` times these.
    """

    pair_counts: dict[tuple[int, int], int]
    edge_counts: list[int]
    scale: Fraction
    objective: float
    violation: np.ndarray
    trials: int
    long_pairs: int
    audit_max: Fraction
    relfeas_lhs: float
    relfeas_rhs: float

    def demands(self, n: int) -> DemandGraph:
        s = float(self.scale)
        return DemandGraph(n, {k: s * v for k, v in self.pair_counts.items()})

    def edge_flow(self) -> np.ndarray:
        s = float(self.scale)
        return np.array([s * k for k in self.edge_counts], dtype=float)

    def degrees(self, n: int) -> np.ndarray:
        deg = np.zeros(n)
        for (x, y), k in self.pair_counts.items():
            deg[x] += k
            deg[y] += k
        return deg * float(self.scale)


# Called with every congestion audit performed by an oracle round.
audit_observers: list[Callable[[CongestionAudit], None]] = []


def width_bound(params: Params, m: int) -> float:
    """Largest violation a successful round can produce.

    A round's scale is at most ``2n / (target L)``. Each matching routes at
    most ``4m / (kappa c n)`` unit paths per unit of capacity, a round uses
    at most ``hops`` matchings per trial, and a vertex gains at most two
    unit demands per trial.
    """
    n = params.n
    hops, _ = params.chain_plan()
    scale = 2 * n / (params.demand_target * params.L)
    edge = scale * params.trial_cap * hops * 4 * max(m, 1) / (params.kappa * params.c * n)
    vertex = scale * 2 * params.trial_cap / params.beta
    return max(1.0, edge, vertex)


def flow_player_round(graph: WeightedGraph, points: np.ndarray, duals: DualState,
                      params: Params, seed: int, round_index: int,
                      fast: bool = True) -> RoundResult | Cut:
    """Collect long chained pairs over random direction trials and route them.

    Trial ``i`` of round ``t`` draws its directions from the stream
    ``(seed, ROUND_STREAM, t, i)``. Any trial whose max-flow is blocked by a
    sparse balanced cut ends the round with that cut.
    """
    n, d = points.shape
    hops, rho = params.chain_plan()
    cover = FlowCover(graph, points, params, list(duals.edge), list(duals.vertex), fast)
    collected: list[tuple[int, int]] = []
    # Pair positions used at each hop of each trial, for routing afterwards.
    hop_use: list[tuple[object, list[int]]] = []
    trials = 0
    audit_max = Fraction(0)
    while len(collected) < params.demand_target:
        if trials >= params.trial_cap:
            raise OracleStarvation(
                f"round {round_index}: {len(collected)} long pairs after {trials} trials, "
                f"needed {params.demand_target:.3f}")
        rng = trial_rng(seed, ROUND_STREAM, round_index, trials)
        chain = sample_shuffled(d, hops, rho, rng)
        trials += 1
        ms = []
        for u in chain.vectors:
            m = cover(u)
            if isinstance(m, Cut):
                return m
            audit = congestion_audit(graph, m, params, fast)
            for observe in audit_observers:
                observe(audit)
            if not audit.ok:
                raise ArithmeticError(f"unit routing congestion {audit.max_congestion} "
                                      f"exceeds {audit.bound}")
            audit_max = max(audit_max, audit.max_congestion)
            ms.append(m)
        composed = compose_chain(ms, n)
        position = [{x: k for k, (x, _) in enumerate(m.pairs)} for m in ms]
        picks: list[list[int]] = [[] for _ in ms]
        for x, walk in sorted(composed.walks.items()):
            y = walk[-1]
            if x != y and float(np.sum((points[x] - points[y]) ** 2)) >= params.L:
                collected.append((x, y))
                for r in range(len(ms)):
                    picks[r].append(position[r][walk[r]])
        hop_use += [(m, p) for m, p in zip(ms, picks) if p]
    # Walks of one chain are vertex-disjoint, so each pair is routed at most once per hop.
    edge_counts = [0] * graph.m
    for m, picks in hop_use:
        for e, k in enumerate(unit_path_flows(m, graph.m, picks, fast)):
            edge_counts[e] += k
    pair_counts: dict[tuple[int, int], int] = {}
    sq = []
    for x, y in collected:
        key = (x, y) if x < y else (y, x)
        pair_counts[key] = pair_counts.get(key, 0) + 1
        sq.append(float(np.sum((points[x] - points[y]) ** 2)))
    scale = Fraction(2 * n) / Fraction(math.fsum(sq))
    s = float(scale)
    objective = s * math.fsum(sq)
    flow = np.array(edge_counts, dtype=float) * s
    deg = np.zeros(n)
    for (x, y), k in pair_counts.items():
        deg[x] += k
        deg[y] += k
    deg *= s
    cap = duals.capacity
    violation = np.concatenate([flow / cap if graph.m else np.zeros(0), deg / params.beta])
    lhs = math.fsum(duals.edge * flow) + math.fsum(duals.vertex * deg)
    rhs = duals.mass()
    if lhs > rhs * (1 + 1e-9):
        raise ArithmeticError(f"round {round_index}: weighted load {lhs} exceeds dual mass {rhs}")
    return RoundResult(pair_counts, edge_counts, scale, objective, violation, trials,
                       len(collected), audit_max, lhs, rhs)


# -- The flow-or-cut oracle ----------------------------------------------------


@dataclass
class FlowCertificate:
    """Averaged, halved flow with demands ``demands`` routable in the graph."""

    demands: DemandGraph
    edge_flow: list[Fraction]
    congestion: float
    max_degree: float
    phi: float
    rounds: int
    measured_width: float
    trials: int


def normalize_points(points: np.ndarray) -> np.ndarray:
    """Center and scale so that ``sum_{x<y} |v_x - v_y|^2 = n^2``."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    pts = pts - pts.mean(axis=0)
    spread = embedding_spread(pts)
    if not spread > 0:
        raise ValueError("degenerate embedding: all points coincide")
    return pts * math.sqrt(n * n / spread)


def find_flow(graph: WeightedGraph, points: np.ndarray, params: Params, seed: int,
              fast: bool = True, trace=None, width: float | None = None) -> FlowCertificate | Cut:
    """A feasible flow with payoff at least one against ``points``, or a sparse balanced cut.

    First tries ``probe_count`` direct max-flow probes; any blocked probe
    yields its cut. Otherwise runs the multiplicative-weights loop,
    stopping as soon as the running average is within ``1 + 4 eta`` of
    every constraint, and halves the average.
    """
    n = graph.n
    pts = normalize_points(points)
    d = pts.shape[1]
    for i in range(params.probe_count):
        u = standard_normal(trial_rng(seed, PROBE_STREAM, i), (d,))
        out = flow_and_cut(graph, params.kappa, params.c, [float(p) for p in pts @ u])
        if out.is_cut:
            return out.cut
    m = graph.m
    b = np.concatenate([np.array([w for _, _, w in graph.edges]), np.full(n, params.beta)])
    config = MwuConfig(params.eta, width or width_bound(params, m), m + n,
                       iterations=params.max_rounds)
    found: list[Cut] = []

    def oracle(y: np.ndarray, t: int):
        duals = DualState.from_weights(graph, params.beta, y)
        res = flow_player_round(graph, pts, duals, params, seed, t, fast)
        if isinstance(res, Cut):
            found.append(res)
            raise _CutFound()
        if trace is not None:
            trace.write(json.dumps({"iteration": t, "objective": res.objective,
                                    "max_violation": float(np.max(res.violation)),
                                    "pairs": res.long_pairs, "trials": res.trials},
                                   sort_keys=True) + "\n")
        return res

    def rows(res: RoundResult) -> np.ndarray:
        return res.violation * b

    bound = (1 + 4 * params.eta) * b
    try:
        outcome = generic_mwu(oracle, rows, b, config,
                              stop=lambda t, avg: bool(np.all(avg <= bound)))
    except _CutFound:
        return found[0]
    rounds: list[RoundResult] = outcome.solutions
    T = len(rounds)
    # Exact average of the scaled flows, halved.
    edge_flow = [Fraction(0)] * m
    for res in rounds:
        for e, k in enumerate(res.edge_counts):
            if k:
                edge_flow[e] += res.scale * k
    edge_flow = [f / (2 * T) for f in edge_flow]
    for f, (_, _, w) in zip(edge_flow, graph.edges):
        if f > Fraction(w):
            raise MwuError("averaged halved flow exceeds a capacity")
    demands = DemandGraph(n)
    for res in rounds:
        for (x, y), k in res.pair_counts.items():
            demands.add(x, y, float(res.scale * k / (2 * T)))
    deg = demands.degrees()
    congestion = max((float(f / Fraction(w)) for f, (_, _, w) in zip(edge_flow, graph.edges)),
                     default=0.0)
    phi = payoff_phi(pts, demands)
    if phi < 1 - params.phi_tol:
        raise MwuError(f"payoff {phi} below 1")
    if float(deg.max(initial=0.0)) > params.beta * (1 + 1e-9):
        raise MwuError("averaged demand degree exceeds beta")
    return FlowCertificate(demands, edge_flow, congestion, float(deg.max(initial=0.0)), phi, T,
                           outcome.measured_width, sum(r.trials for r in rounds))


class _CutFound(Exception):
    pass
