import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import max_flow_value
from sparsecut.generators import complete_graph, dumbbell_graph, gnp_graph
from sparsecut.graph import GraphError
from sparsecut.maxflow import (EDGE, FlowNetwork, check_flow, endpoint_sets, flow_and_cut,
                               from_dimacs, max_flow, quantization_scale, to_dimacs)


def _random_network(n, arcs_per_node, seed, fractional=False):
    rng = np.random.default_rng(seed)
    pairs = []
    for k in range(arcs_per_node * n):
        u, v = rng.choice(n, 2, replace=False)
        c = int(rng.integers(1, 20))
        cap = c / 4 if fractional else float(c)
        if rng.random() < 0.5:
            pairs.append((int(u), int(v), cap, cap, EDGE, k))
        else:
            pairs.append((int(u), int(v), cap, 0.0, EDGE, k))
    return FlowNetwork(n, 0, n - 1, pairs)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 25), st.integers(1, 4), st.integers(0, 10**6), st.booleans())
def test_max_flow_matches_scipy(n, density, seed, fractional):
    net = _random_network(n, density, seed, fractional)
    res = max_flow(net)
    arcs = [(net.tail[a], net.head[a], net.cap[a]) for a in range(net.num_arcs)]
    assert res.value_units == max_flow_value(n, arcs, net.source, net.sink)
    check_flow(res)
    # min cut capacity equals the flow value
    cut = sum(net.cap[a] for a in range(net.num_arcs)
              if net.tail[a] in res.cut_side and net.head[a] not in res.cut_side)
    assert cut == res.value_units
    assert net.source in res.cut_side and net.sink not in res.cut_side


def test_quantization_scale():
    assert quantization_scale([1.0, 2.0]) == 1
    assert quantization_scale([0.5, 0.25, 3.0]) == 4
    assert quantization_scale([1 / 3, 0.5]) == 6
    # An irrational-looking set falls back to 1e9 resolution.
    assert quantization_scale([math.pi, math.e, math.sqrt(2)]) == 10**9


def test_quantized_capacities_are_exact():
    net = FlowNetwork(3, 0, 2, [(0, 1, 1 / 3, 0.0, EDGE, 0), (1, 2, 0.5, 0.0, EDGE, 1)])
    res = max_flow(net)
    assert Fraction(res.value_units, net.scale) == Fraction(1, 3)


def test_endpoint_sets_ties_and_errors():
    proj = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]
    assert endpoint_sets(proj, 1 / 8) == ((0, 1), (6, 7))
    with pytest.raises(GraphError):
        endpoint_sets([0.0, 1.0, 2.0], 1 / 8)


def test_flow_and_cut_on_dumbbell_cuts_the_bridge():
    g = dumbbell_graph(8)
    proj = [0.0] * 8 + [1.0] * 8
    out = flow_and_cut(g, kappa=2.0, c=1 / 8, proj=proj)
    assert out.is_cut
    assert out.cut.capacity <= 2.0 * (1 / 8) * 16
    assert out.cut.balance >= 2


def test_flow_and_cut_on_complete_graph_routes():
    g = complete_graph(16)
    out = flow_and_cut(g, kappa=1.0, c=1 / 8, proj=list(range(16)))
    assert not out.is_cut
    assert out.flow.value == pytest.approx(1.0 * 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 24), st.floats(0.15, 0.8), st.integers(0, 10**6), st.floats(0.5, 40.0))
def test_flow_and_cut_branch_guarantees(n, p, seed, kappa):
    g = gnp_graph(n, p, seed, (0.5, 2.0))
    rng = np.random.default_rng(seed)
    out = flow_and_cut(g, kappa, 1 / 8, list(rng.normal(size=n)))
    if out.is_cut:
        assert out.cut.balance >= math.floor(n / 8)
        assert out.cut.expansion <= kappa * (1 + 1e-12)
    else:
        assert out.flow.value >= kappa * n / 8 * (1 - 1e-12)


def test_dimacs_round_trip():
    net = _random_network(10, 3, 7)
    back = from_dimacs(to_dimacs(net))
    assert max_flow(back).value_units == max_flow(net).value_units
