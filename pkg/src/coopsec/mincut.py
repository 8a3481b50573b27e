"""Auxiliary flow graph and an s-t min cut solver (Dinic).

Node ids ``0..n-1`` are players, ``n`` is the source and ``n+1`` the sink.
Arcs: ``s -> i`` with capacity ``theta[i]``, ``i -> j`` with ``xi[i, j]``
for every network arc, and ``i -> sink`` with ``penalty[i]``.

A player on the sink side of the cut is secured. Cutting ``s -> i`` pays
for securing ``i``; cutting ``j -> i`` pays for the link from an unsecured
``j``; cutting ``i -> sink`` pays the penalty of an unsecured ``i``.

The returned cut is canonical: the source side is exactly what remains
reachable from ``s`` in the residual graph. That is the smallest source
side among all minimum cuts, hence the largest secured set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from . import settings
from .errors import ValidationError
from .network import SecurityNetwork, to_mask


@dataclass(frozen=True)
class CutResult:
    """Minimum cut. Sides hold auxiliary node ids, so they include ``s`` or the sink."""

    value: float
    source_side: frozenset[int]
    sink_side: frozenset[int]
    n_players: int

    @property
    def secured(self) -> frozenset[int]:
        """Players on the sink side."""
        return frozenset(v for v in self.sink_side if v < self.n_players)

    @property
    def unsecured(self) -> frozenset[int]:
        return frozenset(v for v in self.source_side if v < self.n_players)

    @property
    def secured_mask(self) -> int:
        return to_mask(self.secured)


class AuxiliaryGraph:
    """Residual-ready arc arrays for one network.

    Forward arc ``e`` has its reverse at ``e ^ 1``. ``arcs`` lists the
    ``2n + m`` original arcs as ``(tail, head, capacity)``.
    """

    def __init__(self, net: SecurityNetwork) -> None:
        n = net.n
        self.n_players = n
        self.source = n
        self.sink = n + 1
        self.node_count = n + 2
        self.heads: list[int] = []
        self.base_cap: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n + 2)]
        self.arcs: list[tuple[int, int, float]] = []
        self.source_arc = [0] * n
        self.sink_arc = [0] * n
        self.link_arcs_into: list[list[int]] = [[] for _ in range(n)]
        for i in range(n):
            self.source_arc[i] = self._add(self.source, i, net.theta[i])
        for (j, i), c in zip(net.arcs, net.xi):
            self.link_arcs_into[i].append(self._add(j, i, c))
        for i in range(n):
            self.sink_arc[i] = self._add(i, self.sink, net.penalty[i])
        # an uncuttable arc must outweigh any finite cut
        self.infinity = 1.0 + 2.0 * sum(self.base_cap)

    def _add(self, u: int, v: int, cap: float) -> int:
        e = len(self.heads)
        self.heads += [v, u]
        self.base_cap += [cap, 0.0]
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        self.arcs.append((u, v, cap))
        return e


def min_cut(
    aux: AuxiliaryGraph,
    forced_source: Iterable[int] = (),
    forced_sink: Iterable[int] = (),
) -> CutResult:
    """Minimum s-t cut with some players pinned to either side.

    Pinning adds an infinite-capacity arc ``s -> v`` (or ``v -> sink``),
    realized by raising the capacity of the existing parallel arc.

    A player pinned to the sink side is an outsider known to be secured:
    its own in-link costs are not part of the objective, so those arcs are
    dropped. The returned ``value`` excludes them too.
    """
    forced_source = list(forced_source)
    forced_sink = list(forced_sink)
    for v in forced_source + forced_sink:
        if not 0 <= v < aux.n_players:
            raise ValidationError(f"unknown player {v}")
    if set(forced_source) & set(forced_sink):
        raise ValidationError("a player cannot be pinned to both sides")
    cap = aux.base_cap[:]
    inf = aux.infinity
    for v in forced_source:
        cap[aux.source_arc[v]] += inf
    dropped = set()
    for v in forced_sink:
        cap[aux.sink_arc[v]] += inf
        for e in aux.link_arcs_into[v]:
            cap[e] = 0.0
            dropped.add(e)
    flow = _dinic(aux.node_count, aux.adj, aux.heads, cap, aux.source, aux.sink, settings.TOL)
    reach = _reachable(aux.node_count, aux.adj, aux.heads, cap, aux.source, settings.TOL)
    value = 0.0
    for e in range(0, len(aux.heads), 2):
        u = aux.heads[e + 1]
        if reach[u] and not reach[aux.heads[e]] and e not in dropped:
            value += aux.base_cap[e]
    if settings.DEBUG:
        assert abs(value - flow) <= settings.TOL * max(1.0, abs(flow)) * 10, (value, flow)
    src = frozenset(v for v in range(aux.node_count) if reach[v])
    sink = frozenset(v for v in range(aux.node_count) if not reach[v])
    return CutResult(value, src, sink, aux.n_players)


def _reachable(n_nodes, adj, heads, cap, s, eps) -> list[bool]:
    seen = [False] * n_nodes
    seen[s] = True
    stack = [s]
    while stack:
        u = stack.pop()
        for e in adj[u]:
            v = heads[e]
            if not seen[v] and cap[e] > eps:
                seen[v] = True
                stack.append(v)
    return seen


def _dinic(n_nodes, adj, heads, cap, s, t, eps) -> float:
    total = 0.0
    while True:
        level = [-1] * n_nodes
        level[s] = 0
        queue = [s]
        for u in queue:
            lu = level[u] + 1
            for e in adj[u]:
                v = heads[e]
                if level[v] < 0 and cap[e] > eps:
                    level[v] = lu
                    queue.append(v)
        if level[t] < 0:
            return total
        it = [0] * n_nodes
        path: list[int] = []
        u = s
        while True:
            if u == t:
                push = min(cap[e] for e in path)
                for e in path:
                    cap[e] -= push
                    cap[e ^ 1] += push
                total += push
                # restart from the tail of the first saturated arc
                k = 0
                while cap[path[k]] > eps:
                    k += 1
                del path[k:]
                u = heads[path[-1]] if path else s
                continue
            edges = adj[u]
            i = it[u]
            lu = level[u] + 1
            while i < len(edges):
                e = edges[i]
                if cap[e] > eps and level[heads[e]] == lu:
                    break
                i += 1
            it[u] = i
            if i < len(edges):
                path.append(edges[i])
                u = heads[edges[i]]
                continue
            # dead end
            level[u] = -1
            if not path:
                break
            e = path.pop()
            u = heads[e ^ 1]
            it[u] += 1


def secured_by_cut(net: SecurityNetwork, forced_unsecured: Iterable[int] = (),
                   forced_secured: Iterable[int] = ()) -> CutResult:
    """Convenience wrapper: build the graph for ``net`` and cut it."""
    return min_cut(AuxiliaryGraph(net), forced_unsecured, forced_secured)


__all__ = ["AuxiliaryGraph", "CutResult", "min_cut", "secured_by_cut", "to_mask"]
