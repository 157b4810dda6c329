from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsecut.decomp import length_units, pseudo_decompose, scale_paths
from sparsecut.generators import gnp_graph, random_acyclic_flow
from sparsecut.maxflow import EDGE, FlowError, FlowNetwork, FlowResult, flow_and_cut, max_flow


def _flow_instance(n, m, walks, seed):
    result, num_e = random_acyclic_flow(n, m, walks, seed)
    rng = np.random.default_rng(seed + 1)
    lengths = list(np.round(rng.uniform(0, 4, num_e) * 256) / 256)
    return result, num_e, lengths


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 120), st.integers(1, 60), st.integers(0, 10**6))
def test_fast_and_naive_agree(n, walks, seed):
    result, num_e, lengths = _flow_instance(n, 4 * n, walks, seed)
    fast = pseudo_decompose(result, lengths, fast=True)
    naive = pseudo_decompose(result, lengths, fast=False)
    assert fast.entries == naive.entries
    assert (fast.flow_scale, fast.length_scale) == (naive.flow_scale, naive.length_scale)


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 80), st.integers(1, 40), st.integers(0, 10**6))
def test_decomposition_invariants(n, walks, seed):
    result, num_e, lengths = _flow_instance(n, 4 * n, walks, seed)
    net = result.network
    dec = pseudo_decompose(result, lengths)
    # Entry flows add up to the flow value.
    assert dec.total_units() == result.value_units
    # Flow-weighted path length equals flow-weighted edge length.
    units, scale = length_units(lengths)
    by_arcs = sum(result.flow[a] * units[net.ref[a >> 1]] for a in range(net.num_arcs)
                  if net.kind[a >> 1] == EDGE)
    assert sum(e.flow_units * e.length_units for e in dec.entries) * scale == by_arcs * dec.length_scale
    # Every second vertex is fed by the source, every penultimate feeds the sink.
    fed = {net.head[a] for a in net.adj[net.source] if result.flow[a] > 0}
    feeding = {net.tail[a] for a in range(net.num_arcs) if net.head[a] == net.sink and result.flow[a] > 0}
    assert {e.second for e in dec.entries} <= fed
    assert {e.penultimate for e in dec.entries} <= feeding


@settings(max_examples=30, deadline=None)
@given(st.integers(8, 80), st.integers(1, 40), st.integers(0, 10**6))
def test_scaling_recomposes_flow(n, walks, seed):
    result, num_e, _ = _flow_instance(n, 4 * n, walks, seed)
    k = len(pseudo_decompose(result))
    for fast in (True, False):
        ones = scale_paths(result, [1] * k, fast=fast)
        assert ones.flow == result.flow
        zeros = scale_paths(result, [0] * k, fast=fast)
        assert not any(zeros.flow)
    rng = np.random.default_rng(seed)
    alphas = [Fraction(int(a), 7) for a in rng.integers(0, 14, k)]
    a = scale_paths(result, alphas, fast=True)
    b = scale_paths(result, alphas, fast=False)
    assert a.flow == b.flow
    assert a.edge_flows(num_e) == b.edge_flows(num_e)


def test_unit_path_scaling_counts_paths():
    # Two parallel s-t routes carrying 3 and 5 units; scaling each by 1/f gives one unit per path.
    pairs = [(0, 1, 3.0, 0.0, EDGE, 0), (1, 3, 3.0, 0.0, EDGE, 1),
             (0, 2, 5.0, 0.0, EDGE, 2), (2, 3, 5.0, 0.0, EDGE, 3)]
    res = max_flow(FlowNetwork(4, 0, 3, pairs))
    dec = pseudo_decompose(res)
    assert sorted(e.flow_units for e in dec.entries) == [3, 5]
    scaled = scale_paths(res, [Fraction(1, e.flow_units) for e in dec.entries])
    assert scaled.edge_flows(4) == [1, 1, 1, 1]


def test_decomposition_of_flow_and_cut_flow():
    g = gnp_graph(30, 0.4, 5)
    out = flow_and_cut(g, 0.5, 1 / 8, list(range(30)))
    assert not out.is_cut
    dec = pseudo_decompose(out.flow, [1.0] * g.m)
    assert Counter(e.second for e in dec.entries).keys() <= set(out.sources)
    assert Counter(e.penultimate for e in dec.entries).keys() <= set(out.sinks)


def test_cyclic_flow_rejected():
    pairs = [(0, 1, 1.0, 0.0, EDGE, 0), (1, 2, 1.0, 0.0, EDGE, 1), (2, 1, 1.0, 0.0, EDGE, 2),
             (1, 3, 1.0, 0.0, EDGE, 3)]
    net = FlowNetwork(4, 0, 3, pairs)
    # 0->1->3 plus a circulation 1->2->1
    bad = FlowResult(net, 1, [1, 0, 1, 0, 1, 0, 1, 0], frozenset([0]))
    with pytest.raises(FlowError):
        pseudo_decompose(bad)


def test_scale_factor_count_checked():
    result, _, _ = _flow_instance(20, 80, 5, 1)
    with pytest.raises(ValueError):
        scale_paths(result, [1])
    with pytest.raises(ValueError):
        scale_paths(result, [-1] * len(pseudo_decompose(result)))
