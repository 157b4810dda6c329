"""Pseudo-decomposition of acyclic s-t flows into path summaries.

Each entry records the flow of one peeled path, its second vertex, its
second-to-last vertex and its length under the edge lengths; the paths
themselves are never stored. Paths are peeled by following, at every node,
the lowest-numbered out-arc that still carries flow. Two implementations
share that rule: a link-cut tree (``fast=True``) that peels in O(log n)
amortized time per arc, and a plain walk along the path used as a
reference.

Flows are the integer unit flows of a :class:`FlowResult`. Edge lengths are
converted to exact integers (floats are dyadic rationals) so that path
lengths agree bit for bit between the two implementations.
"""

from __future__ import annotations

from dataclasses import dataclass
from numbers import Number
from typing import Sequence

from .maxflow import EDGE, FlowError, FlowNetwork, FlowResult

_INF = float("inf")


@dataclass(frozen=True)
class PathEntry:
    flow_units: int
    second: int
    penultimate: int
    length_units: int


@dataclass
class PseudoDecomposition:
    """Path summaries of a flow, in peeling order."""

    entries: list[PathEntry]
    flow_scale: int
    length_scale: int

    def __len__(self) -> int:
        return len(self.entries)

    def flow(self, i: int) -> float:
        return self.entries[i].flow_units / self.flow_scale

    def length(self, i: int) -> float:
        return self.entries[i].length_units / self.length_scale

    def total_units(self) -> int:
        return sum(e.flow_units for e in self.entries)

    def as_tuples(self) -> list[tuple[float, int, int, float]]:
        return [(self.flow(i), e.second, e.penultimate, self.length(i))
                for i, e in enumerate(self.entries)]


@dataclass
class ScaledFlow:
    """Per-arc flow obtained by rescaling each peeled path."""

    network: FlowNetwork
    flow: list

    def value(self):
        net = self.network
        return sum(self.flow[a] for a in net.adj[net.source]) - sum(
            self.flow[a] for a in range(net.num_arcs) if net.head[a] == net.source)

    def edge_flows(self, m: int) -> list:
        out: list = [0] * m
        net = self.network
        for k, kind in enumerate(net.kind):
            if kind == EDGE:
                out[net.ref[k]] += self.flow[2 * k] + self.flow[2 * k + 1]
        return out


def length_units(lengths: Sequence[float]) -> tuple[list[int], int]:
    """Exact integer representation of non-negative float lengths."""
    ratios = [float(w).as_integer_ratio() for w in lengths]
    if any(num < 0 for num, _ in ratios):
        raise ValueError("edge lengths must be non-negative")
    # Denominators are powers of two, so the largest is a common multiple.
    scale = max((den for _, den in ratios), default=1)
    return [num * (scale // den) for num, den in ratios], scale


def _arc_lengths(net: FlowNetwork, out: list[list[int]],
                 lengths: Sequence[float] | None) -> tuple[list[int], int]:
    # Integer lengths of the positive-flow arcs; all others stay 0.
    arc_len = [0] * net.num_arcs
    if lengths is None:
        return arc_len, 1
    kind, ref = net.kind, net.ref
    arcs = [a for arcs in out for a in arcs if kind[a >> 1] == EDGE]
    units, scale = length_units([lengths[ref[a >> 1]] for a in arcs])
    for a, u in zip(arcs, units):
        arc_len[a] = u
    return arc_len, scale


def _out_arcs(net: FlowNetwork, flow: Sequence[int]) -> list[list[int]]:
    # Positive-flow out-arcs per node, by increasing arc id.
    out: list[list[int]] = [[] for _ in range(net.num_nodes)]
    tail = net.tail
    for a in [a for a, f in enumerate(flow) if f > 0]:
        out[tail[a]].append(a)
    return out


def _require_acyclic(net: FlowNetwork, out: list[list[int]]) -> None:
    indeg = [0] * net.num_nodes
    for arcs in out:
        for a in arcs:
            indeg[net.head[a]] += 1
    stack = [v for v in range(net.num_nodes) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for a in out[v]:
            w = net.head[a]
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    if seen != net.num_nodes:
        raise FlowError("flow support contains a cycle; cancel cycles first")


def _prepare(result: FlowResult, lengths: Sequence[float] | None):
    net = result.network
    if result.flow and min(result.flow) < 0:
        raise FlowError("arc flows must be non-negative")
    out = _out_arcs(net, result.flow)
    _require_acyclic(net, out)
    if lengths is not None and len(lengths) and min(lengths) < 0:
        raise ValueError("edge lengths must be non-negative")
    arc_len, scale = _arc_lengths(net, out, lengths)
    return net, out, arc_len, scale


def pseudo_decompose(result: FlowResult, lengths: Sequence[float] | None = None,
                     fast: bool = True) -> PseudoDecomposition:
    """Decompose an acyclic flow into (flow, second, second-to-last, length) entries.

    ``lengths`` gives a non-negative length per original edge; terminal arcs
    have length zero.
    """
    net, out, arc_len, scale = _prepare(result, lengths)
    peel = _peel_linkcut if fast else _peel_naive
    entries = peel(net, out, list(result.flow), arc_len, None)
    return PseudoDecomposition(entries, net.scale, scale)


def scale_paths(result: FlowResult, alphas: Sequence[Number],
                fast: bool = True) -> ScaledFlow:
    """Replace every peeled path flow ``f_i`` by ``alphas[i] * f_i`` (in flow units).

    The peeling order is the one used by :func:`pseudo_decompose`, so
    ``alphas`` aligns with its entries. Arithmetic follows the type of
    ``alphas``: Fractions or ints give exact results.
    """
    if any(a < 0 for a in alphas):
        raise ValueError("scale factors must be non-negative")
    net, out, arc_len, _ = _prepare(result, None)
    acc: list = [0] * net.num_arcs
    peel = _peel_linkcut if fast else _peel_naive
    entries = peel(net, out, list(result.flow), arc_len, (list(alphas), acc))
    if len(entries) != len(alphas):
        raise ValueError(f"{len(alphas)} scale factors for {len(entries)} paths")
    return ScaledFlow(net, acc)


def _peel_naive(net: FlowNetwork, out: list[list[int]], rem: list[int],
                arc_len: list[int], scaling) -> list[PathEntry]:
    s, t, head = net.source, net.sink, net.head
    ptr = [0] * net.num_nodes
    entries: list[PathEntry] = []
    while ptr[s] < len(out[s]):
        path = []
        v = s
        while v != t:
            arcs = out[v]
            if ptr[v] == len(arcs):
                raise FlowError(f"flow is not conserved at node {v}")
            a = arcs[ptr[v]]
            path.append(a)
            v = head[a]
        f = min(rem[a] for a in path)
        length = sum(arc_len[a] for a in path)
        if scaling is not None:
            alphas, acc = scaling
            if len(entries) >= len(alphas):
                raise ValueError("fewer scale factors than paths")
            amount = alphas[len(entries)] * f
            for a in path:
                acc[a] += amount
        for a in path:
            rem[a] -= f
            if rem[a] == 0:
                u = net.tail[a]
                arcs = out[u]
                while ptr[u] < len(arcs) and rem[arcs[ptr[u]]] == 0:
                    ptr[u] += 1
        second = head[path[0]]
        penultimate = net.tail[path[-1]]
        entries.append(PathEntry(f, second, penultimate, length))
    return entries


def _peel_linkcut(net: FlowNetwork, out: list[list[int]], rem: list[int],
                  arc_len: list[int], scaling) -> list[PathEntry]:
    # Every node other than the sink hangs from the head of its current arc;
    # nodes whose current arc enters the sink are tree roots, so the root of
    # the source's tree is the second-to-last vertex of the next path.
    s, t, head = net.source, net.sink, net.head
    n = net.num_nodes
    tree = _LinkCutForest(n, track=scaling is not None)
    ptr = [0] * n
    for v in range(n):
        if v != t and out[v]:
            a = out[v][0]
            tree.set_node(v, rem[a], arc_len[a])
            if head[a] != t:
                tree.par[v] = head[a]
    entries: list[PathEntry] = []
    alphas = acc = None
    if scaling is not None:
        alphas, acc = scaling
    while ptr[s] < len(out[s]):
        x = tree.access(s)
        root = tree.first[x]
        if ptr[root] == len(out[root]) or head[out[root][ptr[root]]] != t:
            raise FlowError(f"flow is not conserved at node {root}")
        f = tree.mn[x]
        entries.append(PathEntry(f, head[out[s][ptr[s]]], root, tree.sm[x]))
        if acc is not None:
            if len(entries) > len(alphas):
                raise ValueError("fewer scale factors than paths")
            tree.add_acc(x, alphas[len(entries) - 1] * f)
        tree.add(x, -f)
        # Replace every emptied arc by the node's next positive arc. Zeros
        # lie on the peeled path only; find_zero splays the shallowest one to
        # the root of the path's splay tree, so its left subtree is exactly
        # its ancestors and the cut needs no further access.
        while tree.mn[x] == 0:
            v = tree.find_zero(x)
            tree.detach_left(v)
            arcs = out[v]
            a = arcs[ptr[v]]
            if acc is not None:
                acc[a] += tree.acc[v]
                tree.acc[v] = 0
            rem[a] = 0
            ptr[v] += 1
            while ptr[v] < len(arcs) and rem[arcs[ptr[v]]] == 0:
                ptr[v] += 1
            if ptr[v] < len(arcs):
                b = arcs[ptr[v]]
                tree.set_node(v, rem[b], arc_len[b])
                if head[b] != t:
                    tree.par[v] = head[b]
            else:
                tree.set_node(v, _INF, 0)
            x = v
    return entries


class _LinkCutForest:
    """Rooted link-cut forest with path-min, path-sum and lazy path-add.

    Node values are the remaining flows on the nodes' current arcs; ``wl``
    holds the arc lengths summed by ``sm``, and ``first`` names the leftmost
    (shallowest) node of each splay subtree. Index ``n`` is a null sentinel.
    ``par`` doubles as the splay parent and the path-parent pointer.
    """

    def __init__(self, n: int, track: bool):
        size = n + 1
        self.null = n
        self.left = [n] * size
        self.right = [n] * size
        self.par = [n] * size
        self.val: list = [_INF] * size
        self.mn: list = [_INF] * size
        self.lazy = [0] * size
        self.wl = [0] * size
        self.sm = [0] * size
        self.first = list(range(size))
        self.track = track
        self.acc: list = [0] * size
        self.acc_lazy: list = [0] * size

    def set_node(self, v: int, value, length: int) -> None:
        # v must be a splay root whose own pending updates are pushed.
        self.val[v] = value
        self.wl[v] = length
        self._pull(v)

    def _pull(self, x: int) -> None:
        left, right = self.left[x], self.right[x]
        mn = self.mn
        m = self.val[x]
        if mn[left] < m:
            m = mn[left]
        if mn[right] < m:
            m = mn[right]
        mn[x] = m
        self.sm[x] = self.wl[x] + self.sm[left] + self.sm[right]
        self.first[x] = x if left == self.null else self.first[left]

    def _push(self, x: int) -> None:
        null = self.null
        d = self.lazy[x]
        if d:
            val, mn, lazy = self.val, self.mn, self.lazy
            for c in (self.left[x], self.right[x]):
                if c != null:
                    val[c] += d
                    mn[c] += d
                    lazy[c] += d
            lazy[x] = 0
        if self.track:
            self._push_acc(x)

    def _push_acc(self, x: int) -> None:
        d = self.acc_lazy[x]
        if d:
            acc, acc_lazy, null = self.acc, self.acc_lazy, self.null
            for c in (self.left[x], self.right[x]):
                if c != null:
                    acc[c] += d
                    acc_lazy[c] += d
            acc_lazy[x] = 0

    def _splay(self, x: int, pull: bool = True) -> None:
        left, right, par, null = self.left, self.right, self.par, self.null
        # Push pending updates from the splay root down to x.
        stack = [x]
        y = x
        while True:
            p = par[y]
            if p == null or (left[p] != y and right[p] != y):
                break
            stack.append(p)
            y = p
        val, mn, wl, sm, first, lazy = self.val, self.mn, self.wl, self.sm, self.first, self.lazy
        track = self.track
        for y in reversed(stack):
            d = lazy[y]
            if d:
                c = left[y]
                if c != null:
                    val[c] += d
                    mn[c] += d
                    lazy[c] += d
                c = right[y]
                if c != null:
                    val[c] += d
                    mn[c] += d
                    lazy[c] += d
                lazy[y] = 0
            if track:
                self._push_acc(y)
        if len(stack) == 1:
            return
        while True:
            p = par[x]
            if p == null or (left[p] != x and right[p] != x):
                break
            g = par[p]
            if g == null or (left[g] != p and right[g] != p):
                order = (x,)
            elif (left[g] == p) == (left[p] == x):
                order = (p, x)
            else:
                order = (x, x)
            for z in order:
                # Rotate z above its splay parent q.
                q = par[z]
                h = par[q]
                if h != null:
                    if left[h] == q:
                        left[h] = z
                    elif right[h] == q:
                        right[h] = z
                par[z] = h
                if left[q] == z:
                    b = right[z]
                    left[q] = b
                    right[z] = q
                else:
                    b = left[z]
                    right[q] = b
                    left[z] = q
                if b != null:
                    par[b] = q
                par[q] = z
                lq, rq = left[q], right[q]
                m = val[q]
                if mn[lq] < m:
                    m = mn[lq]
                if mn[rq] < m:
                    m = mn[rq]
                mn[q] = m
                sm[q] = wl[q] + sm[lq] + sm[rq]
                first[q] = q if lq == null else first[lq]
        if pull:
            self._pull(x)

    def access(self, x: int) -> int:
        """Make the root-to-x path preferred and return its splay root."""
        null, left, right, par, lazy = self.null, self.left, self.right, self.par, self.lazy
        last = null
        y = x
        while y != null:
            p = par[y]
            if p != null and (left[p] == y or right[p] == y):
                self._splay(y, pull=False)
            elif lazy[y] or self.track:
                self._push(y)
            right[y] = last
            self._pull(y)
            last = y
            y = par[y]
        return last

    def add(self, x: int, d) -> None:
        self.val[x] += d
        self.mn[x] += d
        self.lazy[x] += d

    def add_acc(self, x: int, d) -> None:
        self.acc[x] += d
        self.acc_lazy[x] += d

    def find_zero(self, x: int) -> int:
        """Shallowest node of value 0 in x's splay tree.

        Cutting the shallowest one first keeps the deeper zero nodes on the
        source's path, so they are cut (and flushed) in the same sweep.
        """
        mn, left, right, val, lazy = self.mn, self.left, self.right, self.val, self.lazy
        # Descend without pushing: ``off`` is the pending add of the ancestors.
        off = 0
        while True:
            below = off + lazy[x]
            if mn[left[x]] + below == 0:
                x = left[x]
            elif val[x] + off == 0:
                break
            else:
                x = right[x]
            off = below
        self._splay(x)
        return x

    def detach_left(self, v: int) -> None:
        """Cut a splay root from its tree parent (its left splay subtree).

        The detached ancestors keep the path-parent pointer of the old splay
        tree.
        """
        left = self.left[v]
        if left != self.null:
            self.par[left] = self.par[v]
            self.left[v] = self.null
        self.par[v] = self.null
