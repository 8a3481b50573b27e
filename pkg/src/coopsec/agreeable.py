"""Agreeable allocations: Shapley-like sharing restricted to "sensible" join orders.

Players join the grand coalition in waves. A wave contains everyone who
would rationally secure themselves given that all earlier waves are
secured. The allocation averages marginal costs over every order that
respects the waves.

The delta variant lets a wave be led by groups of up to ``delta`` players
that only become rational together.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import settings
from .errors import GuardExceededError, NotReducedError, ValidationError
from .network import Allocation, SecurityNetwork, from_mask, reduce_network, to_mask
from .strategies import CoalitionOracle, network_optimal

DEFAULT_PERMUTATION_CAP = 10**6
MAX_DELTA = 6


def require_reduced(net: SecurityNetwork) -> None:
    """Raise unless the social optimum secures every player."""
    secured = network_optimal(net).secured
    if len(secured) != net.n:
        missing = sorted(set(range(net.n)) - secured)
        raise NotReducedError(f"players {missing} are unsecured in the optimum; reduce first")


@dataclass(frozen=True)
class AgreeableFamily:
    sets: tuple[frozenset[int], ...]
    exists: bool

    @property
    def covered(self) -> frozenset[int]:
        return frozenset().union(*self.sets) if self.sets else frozenset()


def joins_after(net: SecurityNetwork, i: int, before: int) -> bool:
    """Whether ``i`` secures itself when joining the secured set ``before``.

    ``i`` still pays for in-links from outside ``before`` but spares the
    members of ``before`` their links from ``i``.
    """
    cost = net.theta[i] + net.in_cost(i, ~before) - net.out_cost(i, before)
    return net.penalty[i] >= cost - settings.TOL


def agreeable_family(net: SecurityNetwork, check_reduced: bool = True) -> AgreeableFamily:
    """Waves of players, each rational given every earlier wave is secured."""
    if check_reduced:
        require_reduced(net)
    before = 0
    sets = []
    while True:
        wave = [i for i in range(net.n) if not before >> i & 1 and joins_after(net, i, before)]
        if not wave:
            break
        sets.append(frozenset(wave))
        before |= to_mask(wave)
    return AgreeableFamily(tuple(sets), before == net.full_mask)


def agreeable_shares(net: SecurityNetwork, family: AgreeableFamily) -> Allocation:
    """Closed-form average of marginal costs over wave-respecting orders."""
    shares = np.zeros(net.n)
    prev = 0
    for wave in family.sets:
        wmask = to_mask(wave)
        upto = prev | wmask
        for i in wave:
            shares[i] = (net.theta[i]
                         + net.in_cost(i, ~upto)
                         - net.out_cost(i, prev)
                         + net.in_cost(i, wmask) / 2
                         - net.out_cost(i, wmask) / 2)
        prev = upto
    return Allocation(shares)


def agreeable_allocation(net: SecurityNetwork, reduce: bool = False) -> Allocation | None:
    """Agreeable allocation, or ``None`` when the waves stall before covering everyone.

    With ``reduce=True`` the network is reduced first; players removed by the
    reduction are charged their penalty.
    """
    if reduce:
        return _on_reduced(net, lambda sub: agreeable_allocation(sub))
    family = agreeable_family(net)
    if not family.exists:
        return None
    return agreeable_shares(net, family)


def _on_reduced(net: SecurityNetwork, solve) -> Allocation | None:
    red = reduce_network(net)
    inner = solve(red.network) if red.network.n else Allocation(np.zeros(0))
    if inner is None:
        return None
    shares = np.zeros(net.n)
    for i in red.removed:
        shares[i] = net.penalty[i]
    for k, orig in enumerate(red.kept):
        shares[orig] = inner.shares[k]
    return Allocation(shares)


def agreeable_orders(family: AgreeableFamily) -> Iterable[tuple[int, ...]]:
    """Every order that lists the waves in sequence (any order inside a wave)."""
    per_wave = [list(itertools.permutations(sorted(w))) for w in family.sets]
    for combo in itertools.product(*per_wave):
        yield tuple(itertools.chain.from_iterable(combo))


# -- groups of up to delta players ---------------------------------------------

@dataclass(frozen=True)
class MinimalGroups:
    """Smallest jointly rational groups that can join ``base``."""

    size: int | None
    groups: tuple[frozenset[int], ...]


def delta_mrs(net: SecurityNetwork, base: Iterable[int], delta: int,
              oracle: CoalitionOracle | None = None, max_delta: int = MAX_DELTA) -> MinimalGroups:
    """Groups ``V`` outside ``base`` with ``c(base+V) < c(base) + L(V)``, of smallest size <= delta.

    Strict inequality: a group that only breaks even is not rational.
    """
    if delta < 1:
        raise ValidationError("delta must be at least 1")
    if delta > max_delta:
        raise GuardExceededError(f"delta is limited to {max_delta}")
    oracle = oracle or CoalitionOracle(net)
    bmask = to_mask(base)
    outside = [i for i in range(net.n) if not bmask >> i & 1]
    c_base = oracle.cost(bmask)
    tol = settings.TOL
    for size in range(1, min(delta, len(outside)) + 1):
        groups = []
        for combo in itertools.combinations(outside, size):
            vmask = to_mask(combo)
            if oracle.cost(bmask | vmask) < c_base + sum(net.penalty[v] for v in combo) - tol:
                groups.append(frozenset(combo))
        if groups:
            return MinimalGroups(size, tuple(groups))
    return MinimalGroups(None, ())


def valid_permutations(net: SecurityNetwork, base: Iterable[int], delta: int,
                       cap: int = DEFAULT_PERMUTATION_CAP,
                       oracle: CoalitionOracle | None = None,
                       groups: MinimalGroups | None = None) -> list[tuple[int, ...]]:
    """Orders of the minimal groups' members that can follow ``base``.

    For each order of the groups, the members each group adds beyond the
    earlier ones come next, in any internal order. Duplicates are removed.
    """
    if groups is None:
        groups = delta_mrs(net, base, delta, oracle)
    sets = [to_mask(g) for g in groups.groups]
    if not sets:
        return []
    produced = 0
    out: set[tuple[int, ...]] = set()

    def walk(covered: int, prefix: tuple[int, ...]) -> None:
        nonlocal produced
        fresh = [s & ~covered for s in sets if s & ~covered]
        if not fresh:
            produced += 1
            if produced > cap:
                raise GuardExceededError(f"more than {cap} candidate orders")
            out.add(prefix)
            return
        for chunk in dict.fromkeys(fresh):
            members = sorted(from_mask(chunk))
            for perm in itertools.permutations(members):
                walk(covered | chunk, prefix + perm)

    walk(0, ())
    return sorted(out)


@dataclass(frozen=True)
class DeltaStage:
    base: frozenset[int]
    groups: MinimalGroups
    fragments: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class DeltaAgreeable:
    delta: int
    stages: tuple[DeltaStage, ...]
    exists: bool
    allocation: Allocation | None

    @property
    def permutation_count(self) -> int:
        return math.prod(len(s.fragments) for s in self.stages) if self.exists else 0

    def permutations(self, cap: int = DEFAULT_PERMUTATION_CAP) -> list[tuple[int, ...]]:
        """Every full order: one fragment per stage, concatenated."""
        if not self.exists:
            return []
        if self.permutation_count > cap:
            raise GuardExceededError(f"{self.permutation_count} orders exceed the cap {cap}")
        return [tuple(itertools.chain.from_iterable(p))
                for p in itertools.product(*(s.fragments for s in self.stages))]


def delta_agreeable(net: SecurityNetwork, delta: int, cap: int = DEFAULT_PERMUTATION_CAP,
                    check_reduced: bool = True, max_delta: int = MAX_DELTA) -> DeltaAgreeable:
    """Build stages of minimal groups from the empty set until everyone has joined.

    The allocation is the exact mean of extreme core allocations over all
    resulting orders. Stages are independent, so it is computed stage by
    stage rather than by expanding the product of fragments.
    """
    if check_reduced:
        require_reduced(net)
    oracle = CoalitionOracle(net)
    covered = 0
    stages = []
    shares = np.zeros(net.n)
    while covered != net.full_mask:
        groups = delta_mrs(net, from_mask(covered), delta, oracle, max_delta)
        if groups.size is None:
            return DeltaAgreeable(delta, tuple(stages), False, None)
        frags = valid_permutations(net, (), delta, cap, oracle, groups=groups)
        stage_sum = np.zeros(net.n)
        for frag in frags:
            mask = covered
            prev = oracle.cost(mask)
            for i in frag:
                mask |= 1 << i
                cur = oracle.cost(mask)
                stage_sum[i] += cur - prev
                prev = cur
        shares += stage_sum / len(frags)
        stages.append(DeltaStage(from_mask(covered), groups, tuple(frags)))
        covered |= to_mask(itertools.chain.from_iterable(groups.groups))
    return DeltaAgreeable(delta, tuple(stages), True, Allocation(shares))


def delta_agreeable_allocation(net: SecurityNetwork, delta: int,
                               cap: int = DEFAULT_PERMUTATION_CAP,
                               max_delta: int = MAX_DELTA) -> Allocation | None:
    return delta_agreeable(net, delta, cap, max_delta=max_delta).allocation


def smallest_delta(net: SecurityNetwork, max_delta: int = 3,
                   cap: int = DEFAULT_PERMUTATION_CAP) -> int | None:
    """Smallest ``delta <= max_delta`` for which a delta-agreeable allocation exists.

    A run with ``max_delta`` uses the smallest workable group size at every
    stage, so the answer is the largest group size it needed.
    """
    run = delta_agreeable(net, max_delta, cap, max_delta=max(max_delta, MAX_DELTA))
    if not run.exists:
        return None
    return max((st.groups.size for st in run.stages), default=1)
