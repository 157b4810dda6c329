import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from sparsecut.cutmatch import (cut_player_bisection, embedding_player, expansion_radius,
                                flow_matching_player, greedy_match, hypercube_points, run_game,
                                sphere_point_set)
from sparsecut.generators import complete_graph, dumbbell_graph
from sparsecut.graph import Cut, WeightedGraph


def _naive_greedy(points, S, T):
    left, right = list(S), list(T)
    pairs = []
    while left:
        best = min((float(np.sum((points[x] - points[y]) ** 2)), x, y) for x in left for y in right)
        pairs.append((best[1], best[2]))
        left.remove(best[1])
        right.remove(best[2])
    return pairs


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(1, 3), st.integers(0, 10**6))
def test_greedy_match_agrees_with_naive_scan(half, d, seed):
    rng = np.random.default_rng(seed)
    # Coarse grid coordinates force distance ties.
    pts = rng.integers(-2, 3, size=(2 * half, d)).astype(float)
    order = rng.permutation(2 * half)
    S, T = sorted(order[:half].tolist()), sorted(order[half:].tolist())
    pairs, cost = greedy_match(pts, S, T)
    assert pairs == _naive_greedy(pts, S, T)
    dist = np.sum((pts[S][:, None] - pts[T][None]) ** 2, axis=2)
    rows, cols = linear_sum_assignment(dist)
    assert cost >= dist[rows, cols].sum() - 1e-9


def test_greedy_match_examples():
    pts = np.array([[0.0], [1.0], [5.0], [5.5]])
    assert greedy_match(pts, [0, 2], [1, 3]) == ([(2, 3), (0, 1)], 1.25)
    assert greedy_match(pts, [], []) == ([], 0.0)
    with pytest.raises(ValueError):
        greedy_match(pts, [0], [1, 2])


@pytest.mark.parametrize("d,i", [(3, 0), (4, 2), (5, 4)])
def test_hypercube_coordinate_bisection_cost(d, i):
    pts = hypercube_points(d)
    n = 1 << d
    S = [x for x in range(n) if not x >> i & 1]
    T = [x for x in range(n) if x >> i & 1]
    pairs, cost = greedy_match(pts, S, T)
    assert pairs == [(x, x | 1 << i) for x in S]
    assert cost == pytest.approx(n / 2 * 4 / d)
    assert np.allclose(np.sum(pts * pts, axis=1), 1.0)


def test_flow_player_matches_on_complete_graph():
    g = complete_graph(8)
    pairs = flow_matching_player(g, ((0, 1, 2, 3), (4, 5, 6, 7)))
    assert sorted(x for x, _ in pairs) == [0, 1, 2, 3]
    assert sorted(y for _, y in pairs) == [4, 5, 6, 7]


def test_flow_player_uses_matching_edges():
    g = WeightedGraph(6, [(0, 3, 1.0), (1, 4, 1.0), (2, 5, 1.0)])
    assert flow_matching_player(g, ((0, 1, 2), (3, 4, 5))) == [(0, 3), (1, 4), (2, 5)]


def test_flow_player_cuts_dumbbell():
    g = dumbbell_graph(6)
    out = flow_matching_player(g, (tuple(range(6)), tuple(range(6, 12))))
    assert isinstance(out, Cut)
    assert out.expansion < 1
    assert out.members() in (list(range(6)), list(range(6, 12)))
    with pytest.raises(ValueError):
        flow_matching_player(dumbbell_graph(6, 0.5), (tuple(range(6)), tuple(range(6, 12))))


def test_cut_player_halves():
    lap = dumbbell_graph(4).laplacian()
    S, T = cut_player_bisection(lap, 0)
    assert {S, T} == {(0, 1, 2, 3), (4, 5, 6, 7)}
    S, T = cut_player_bisection(np.zeros((6, 6)), 1)
    assert len(S) == len(T) == 3 and set(S) | set(T) == set(range(6))


def test_sphere_net_is_closed_and_separated():
    emb = sphere_point_set(2, density=0.5, rng=3, samples=4000, test_sets=20)
    pts = emb.points
    assert pts.shape[0] % 2 == 0
    assert np.allclose(pts.sum(axis=0), 0.0, atol=1e-9)
    half = pts.shape[0] // 2
    assert np.allclose(pts[:half], -pts[half:])
    dist = np.sqrt(np.sum((pts[:, None] - pts[None]) ** 2, axis=2))
    np.fill_diagonal(dist, np.inf)
    assert dist.min() >= emb.gamma - 1e-12
    assert emb.second_moment_floor > 0 and emb.radius >= 0


def test_expansion_radius_on_a_line():
    pts = np.arange(8, dtype=float)[:, None]
    # Growing {0..3} by one vertex (ceil(4/12) = 1) needs vertex 4 at squared distance 1.
    assert expansion_radius(pts, np.arange(4)) == 1.0
    assert expansion_radius(pts, np.array([0, 7])) == 1.0


def test_zero_round_game():
    state = run_game(8, embedding_player(hypercube_points(3)), 0)
    assert state.t == 0 and state.to_csv().strip() == "t,psi,lambda2,increment,matching_cost"


def test_hypercube_game_tracks_potential():
    pts = hypercube_points(4)
    state = run_game(16, embedding_player(pts), 4, rng=2, points=pts)
    assert state.t == 4
    assert np.all(state.degrees() == 4)
    for inc, bound in zip(state.increments, state.bounds):
        assert inc <= bound * (1 + 1e-12)
    rows = list(csv.DictReader(io.StringIO(state.to_csv())))
    assert [int(r["t"]) for r in rows] == [1, 2, 3, 4]
    assert float(rows[-1]["lambda2"]) <= float(rows[-1]["psi"]) + 1e-6


def test_game_ends_on_cut():
    g = dumbbell_graph(4)
    lobes = ((0, 1, 2, 3), (4, 5, 6, 7))
    state = run_game(8, lambda b: flow_matching_player(g, b), 5, first_bisection=lobes)
    assert state.t == 0 and isinstance(state.cut, Cut)
    with pytest.raises(ValueError):
        run_game(4, lambda b: [(0, 2)], 1)
