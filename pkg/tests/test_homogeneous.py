import itertools

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_arcs, rng_for, TOPOLOGIES
from coopsec import GuardExceededError
from coopsec.agreeable import agreeable_family
from coopsec.homogeneous import (
    Prediction,
    core_numbers,
    find_kl_core,
    has_k_core,
    is_quasi_homogeneous,
    k_core,
    max_out_to_rest,
    min_in_within,
    predict_agreeable_existence,
)
from coopsec.network import SecurityNetwork


def homogeneous(n, arcs, theta=1.0, penalty=5.0, xi=2.0):
    return SecurityNetwork.from_links([theta] * n, [penalty] * n, {a: xi for a in arcs})


@st.composite
def digraphs(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    arcs = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return homogeneous(n, arcs)


def brute_k_core(net, k):
    best = frozenset()
    for r in range(net.n + 1):
        for combo in itertools.combinations(range(net.n), r):
            s = frozenset(combo)
            if min_in_within(net, s) >= k and len(s) > len(best):
                best = s
    return best if best else frozenset()


def brute_kl_core(net, margin):
    found = [frozenset(c) for r in range(1, net.n + 1)
             for c in itertools.combinations(range(net.n), r)
             if min_in_within(net, frozenset(c)) >= max_out_to_rest(net, frozenset(c)) + margin]
    return max(map(len, found)) if found else 0


class TestDetection:
    def test_uniform(self):
        params = is_quasi_homogeneous(homogeneous(3, [(0, 1)]))
        assert (params.theta, params.penalty, params.xi) == (1.0, 5.0, 2.0)

    def test_mixed_rejected(self):
        net = SecurityNetwork.from_links([1.0, 2.0], [5.0, 5.0], {(0, 1): 2.0})
        assert is_quasi_homogeneous(net) is None
        with pytest.raises(ValueError):
            predict_agreeable_existence(net)

    def test_no_arcs(self):
        assert is_quasi_homogeneous(homogeneous(2, [])) is None


@settings(max_examples=150, deadline=None)
@given(digraphs(), st.integers(0, 4))
def test_k_core_is_largest_qualifying_set(net, k):
    expected = brute_k_core(net, k)
    got = k_core(net, k)
    assert len(got) == len(expected)
    assert not got or min_in_within(net, got) >= k
    assert (has_k_core(net, k) is None) == (not got)


@settings(max_examples=100, deadline=None)
@given(digraphs())
def test_core_numbers_match_peeling(net):
    nums = core_numbers(net)
    for i in range(net.n):
        assert i in k_core(net, nums[i])
        assert i not in k_core(net, nums[i] + 1)


def test_core_numbers_match_networkx_on_symmetric_graphs():
    rng = rng_for(71)
    for _ in range(50):
        n = int(rng.integers(2, 15))
        g = nx.gnp_random_graph(n, 0.35, seed=int(rng.integers(1 << 30)))
        arcs = [(a, b) for a, b in g.edges] + [(b, a) for a, b in g.edges]
        net = homogeneous(n, arcs)
        assert core_numbers(net) == [nx.core_number(g)[i] for i in range(n)]


@settings(max_examples=150, deadline=None)
@given(digraphs(max_n=6), st.integers(1, 3))
def test_exact_kl_core_is_largest(net, margin):
    got = find_kl_core(net, margin)
    size = brute_kl_core(net, margin)
    assert (0 if got is None else len(got)) == size
    if got is not None:
        assert min_in_within(net, got) >= max_out_to_rest(net, got) + margin
    heuristic = find_kl_core(net, margin, exact=False)
    if heuristic is not None:
        assert min_in_within(net, heuristic) >= max_out_to_rest(net, heuristic) + margin


def test_kl_core_guard():
    n = 21
    arcs = [(a, b) for a in range(n) for b in range(n) if a != b]
    with pytest.raises(GuardExceededError):
        find_kl_core(homogeneous(n, arcs), 1)


class TestPrediction:
    def test_clique_stalls(self):
        arcs = [(a, b) for a in range(6) for b in range(6) if a != b]
        pred = predict_agreeable_existence(homogeneous(6, arcs, 10.0, 20.0, 4.0))
        assert pred.verdict is Prediction.NOT_EXISTS
        assert pred.witness == frozenset(range(6))

    def test_star_exists(self):
        arcs = [(v, 0) for v in range(1, 7)] + [(0, v) for v in range(1, 7)]
        pred = predict_agreeable_existence(homogeneous(7, arcs, 10.0, 20.0, 4.0))
        assert pred.verdict is Prediction.EXISTS

    def test_break_even_still_joins(self):
        # ratio exactly 1: each player joins with one unsecured in-neighbour
        net = homogeneous(3, [(0, 1), (1, 2), (2, 0)], 1.0, 3.0, 2.0)
        assert agreeable_family(net, check_reduced=False).exists
        pred = predict_agreeable_existence(net)
        # the cycle is its own 1-core and no set clears margin 2, so neither bound decides
        assert pred.threshold == 1
        assert pred.verdict is Prediction.INDETERMINATE


def test_predictions_are_sound():
    rng = rng_for(73)
    counts = {p: 0 for p in Prediction}
    for _ in range(400):
        n = int(rng.integers(2, 8))
        arcs = random_arcs(rng, n, TOPOLOGIES[int(rng.integers(0, len(TOPOLOGIES)))])
        if not arcs:
            continue
        theta, xi = float(rng.integers(1, 6)), float(rng.integers(1, 4))
        penalty = theta + xi * float(rng.integers(0, 5)) + float(rng.choice([0.0, 0.5]))
        net = homogeneous(n, arcs, theta, penalty, xi)
        pred = predict_agreeable_existence(net)
        counts[pred.verdict] += 1
        exists = agreeable_family(net, check_reduced=False).exists
        if pred.verdict is Prediction.EXISTS:
            assert exists
        elif pred.verdict is Prediction.NOT_EXISTS:
            assert not exists
    assert counts[Prediction.EXISTS] > 50 and counts[Prediction.NOT_EXISTS] > 50
