import itertools

import networkx as nx
import pytest
from hypothesis import given, settings

from conftest import example, networks, random_network, rng_for
from coopsec import settings as lib_settings
from coopsec.mincut import AuxiliaryGraph, min_cut
from coopsec.network import SecurityNetwork
from coopsec.strategies import secured_set_cost


def test_auxiliary_shape():
    net = example("strict_inclusion")
    aux = AuxiliaryGraph(net)
    assert aux.node_count == 5
    assert len(aux.arcs) == 2 * net.n + net.m == 8


def test_zero_cost_example_secures_everyone():
    net = example("strict_inclusion")
    cut = min_cut(AuxiliaryGraph(net))
    assert cut.value == 0.0
    assert cut.secured == frozenset({0, 1, 2})
    assert cut.source_side >= {net.n}


def test_forced_sides():
    net = example("two_player")
    aux = AuxiliaryGraph(net)
    cut = min_cut(aux, forced_source=[1])
    assert 1 in cut.unsecured
    assert cut.value == pytest.approx(115.0)  # 100 penalty plus 15 to secure player 0 alone
    with pytest.raises(ValueError):
        min_cut(aux, forced_source=[0], forced_sink=[0])


def _networkx_value(net: SecurityNetwork) -> float:
    g = nx.DiGraph()
    s, t = "s", "t"
    for i in range(net.n):
        g.add_edge(s, i, capacity=net.theta[i])
        g.add_edge(i, t, capacity=net.penalty[i])
    for (j, i), c in zip(net.arcs, net.xi):
        g.add_edge(j, i, capacity=c)
    return nx.minimum_cut_value(g, s, t) if net.n else 0.0


@settings(max_examples=100, deadline=None)
@given(networks(max_n=8))
def test_value_matches_networkx(net):
    assert min_cut(AuxiliaryGraph(net)).value == pytest.approx(_networkx_value(net))


def test_value_matches_networkx_larger():
    rng = rng_for(11)
    for _ in range(20):
        net = random_network(rng, 20, 60, kind="erdos_renyi")
        assert min_cut(AuxiliaryGraph(net)).value == pytest.approx(_networkx_value(net))


@settings(max_examples=100, deadline=None)
@given(networks(max_n=7, min_n=1))
def test_canonical_cut_is_largest_optimal_set(net):
    cut = min_cut(AuxiliaryGraph(net))
    full = (1 << net.n) - 1
    costs = {mask: secured_set_cost(net, full, mask) for mask in range(1 << net.n)}
    best = min(costs.values())
    assert cut.value == pytest.approx(best)
    optimal = [m for m, c in costs.items() if c <= best + 1e-9]
    union = 0
    for m in optimal:
        union |= m
    # optimal secured sets are closed under union, so the largest is unique
    assert union in optimal
    assert cut.secured_mask == union


def test_debug_duality_check():
    net = random_network(rng_for(3), 5, 9)
    lib_settings.DEBUG = True
    try:
        min_cut(AuxiliaryGraph(net))
    finally:
        lib_settings.DEBUG = False


def test_all_pinnings_agree_with_enumeration():
    net = example("delta_example")
    aux = AuxiliaryGraph(net)
    for r in range(net.n + 1):
        for out in itertools.combinations(range(net.n), r):
            mask = ((1 << net.n) - 1) & ~sum(1 << i for i in out)
            cut = min_cut(aux, forced_source=out)
            sub_best = min(secured_set_cost(net, (1 << net.n) - 1, s)
                           for s in range(1 << net.n) if s & ~mask == 0)
            assert cut.value == pytest.approx(sub_best)
