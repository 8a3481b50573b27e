"""Security strategies: independent play, the social optimum, coalition best responses."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import settings
from .errors import GuardExceededError, ValidationError
from .mincut import AuxiliaryGraph, min_cut
from .network import (
    SecurityNetwork,
    SecurityProfile,
    actual_security,
    from_mask,
    player_cost,
    to_mask,
)

BRUTE_FORCE_LIMIT = 20
TABLE_LIMIT = 22


@dataclass(frozen=True)
class StrategyResult:
    secured: frozenset[int]
    cost: float
    profile: SecurityProfile


def independent_secure_set(net: SecurityNetwork) -> StrategyResult:
    """Players for whom securing pays off even if every in-neighbour is unsecured.

    Ties (penalty equal to the full securing cost) count as secured.
    """
    tol = settings.TOL
    secured = frozenset(i for i in range(net.n)
                        if net.penalty[i] >= net.theta[i] + net.in_cost(i) - tol)
    cost = sum(net.theta[i] + net.in_cost(i) if i in secured else net.penalty[i]
               for i in range(net.n))
    return StrategyResult(secured, cost, SecurityProfile.from_secured(net, secured))


def secured_set_cost(net: SecurityNetwork, coalition_mask: int, secured_mask: int) -> float:
    """Cost to ``coalition_mask`` when exactly ``secured_mask`` of it is secured.

    Everyone outside the secured set is treated as unsecured.
    """
    total = 0.0
    for i in range(net.n):
        if not coalition_mask >> i & 1:
            continue
        if secured_mask >> i & 1:
            total += net.theta[i]
            for j, c in net.in_arcs[i]:
                if not secured_mask >> j & 1:
                    total += c
        else:
            total += net.penalty[i]
    return total


class CoalitionOracle:
    """Memoized coalition costs ``c(S)`` and maximal optimal secured sets.

    Keys are bitmasks. Each miss runs one min cut with the outsiders pinned
    to the unsecured side.
    """

    def __init__(self, net: SecurityNetwork) -> None:
        self.net = net
        self.aux = AuxiliaryGraph(net)
        self._memo: dict[int, tuple[float, int]] = {0: (0.0, 0)}
        self.evaluations = 0

    def solve(self, mask: int) -> tuple[float, int]:
        hit = self._memo.get(mask)
        if hit is not None:
            return hit
        n = self.net.n
        outsiders = [i for i in range(n) if not mask >> i & 1]
        cut = min_cut(self.aux, forced_source=outsiders)
        secured = cut.secured_mask & mask
        cost = secured_set_cost(self.net, mask, secured)
        self.evaluations += 1
        self._memo[mask] = (cost, secured)
        return cost, secured

    def cost(self, mask: int) -> float:
        return self.solve(mask)[0]

    def secured(self, mask: int) -> int:
        return self.solve(mask)[1]


def network_optimal(net: SecurityNetwork) -> StrategyResult:
    """Socially optimal security decisions via one min cut.

    Among tied optima the largest secured set is returned.
    """
    cut = min_cut(AuxiliaryGraph(net))
    secured = cut.secured
    return StrategyResult(secured, cut.value, SecurityProfile.from_secured(net, secured))


def coalition_cost(net: SecurityNetwork, coalition: Iterable[int]) -> StrategyResult:
    """Best response of a coalition that assumes every outsider is unsecured.

    ``cost`` counts only members; the profile secures the maximal optimal
    subset and leaves outsiders idle.
    """
    mask = _coalition_mask(net, coalition)
    cost, secured = CoalitionOracle(net).solve(mask)
    members = from_mask(secured)
    return StrategyResult(members, cost, SecurityProfile.from_secured(net, members))


def brute_force_coalition_cost(net: SecurityNetwork, coalition: Iterable[int]) -> StrategyResult:
    """Same contract as :func:`coalition_cost`, by enumerating every secured subset.

    All ``2^|S|`` candidate secured sets are priced at once with numpy.
    Ties prefer the larger secured set, then the lexicographically smallest.
    """
    mask = _coalition_mask(net, coalition)
    members = sorted(from_mask(mask))
    k = len(members)
    if k > BRUTE_FORCE_LIMIT:
        raise GuardExceededError(f"brute force limited to {BRUTE_FORCE_LIMIT} members")
    subsets = np.arange(1 << k, dtype=np.int64)
    secured = np.zeros((1 << k, net.n), dtype=bool)
    for pos, i in enumerate(members):
        secured[:, i] = (subsets >> pos) & 1
    theta = np.asarray(net.theta)
    penalty = np.asarray(net.penalty)
    in_s = np.zeros(net.n, dtype=bool)
    in_s[members] = True
    costs = secured @ theta + (~secured[:, in_s]) @ penalty[in_s]
    for (j, i), c in zip(net.arcs, net.xi):
        if in_s[i]:
            costs += c * (secured[:, i] & ~secured[:, j])
    tol = settings.TOL
    best = costs.min()
    tied = np.flatnonzero(costs <= best + tol)
    sizes = secured[tied].sum(axis=1)
    tied = tied[sizes == sizes.max()]
    picks = [tuple(members[p] for p in range(k) if t >> p & 1) for t in tied.tolist()]
    chosen = frozenset(min(picks))
    cost = float(costs[tied[picks.index(min(picks))]])
    return StrategyResult(chosen, cost, SecurityProfile.from_secured(net, chosen))


def cost_table(net: SecurityNetwork) -> np.ndarray:
    """``c(S)`` for every coalition bitmask, by exhaustive vectorized search.

    Uses ``c(S) = L(S) + min_{T <= S} [f(T) - L(T)]`` where ``f(T)`` is the
    securing cost of ``T`` with everyone else unsecured; the inner minimum
    over submasks is a standard subset-min sweep. Independent of the min cut.
    """
    n = net.n
    if n > TABLE_LIMIT:
        raise GuardExceededError(f"cost table limited to {TABLE_LIMIT} players")
    size = 1 << n
    masks = np.arange(size, dtype=np.int64)
    bits = [((masks >> i) & 1).astype(bool) for i in range(n)]
    g = np.zeros(size)
    penalty_sum = np.zeros(size)
    for i in range(n):
        g[bits[i]] += net.theta[i] - net.penalty[i]
        penalty_sum[bits[i]] += net.penalty[i]
    for (j, i), c in zip(net.arcs, net.xi):
        g[bits[i] & ~bits[j]] += c
    for i in range(n):
        view = g.reshape(-1, 2, 1 << i)
        np.minimum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    return penalty_sum + g


def is_nash(net: SecurityNetwork, profile: SecurityProfile) -> bool:
    """True iff no player can strictly lower its own cost by a unilateral change.

    Security states use accurate beliefs, i.e. the largest self-consistent
    secure set (see :func:`actual_security`). Each player's deviations
    range over its own investment and its in-link choices.
    """
    tol = settings.TOL
    arc_pos = {a: k for k, a in enumerate(net.arcs)}

    def cost_of(prof: SecurityProfile, i: int) -> float:
        state = actual_security(net, prof)
        return player_cost(net, prof, i, beliefs=lambda j, _i: state[j])

    for i in range(net.n):
        in_pos = [arc_pos[(j, i)] for j, _ in net.in_arcs[i]]
        if len(in_pos) > BRUTE_FORCE_LIMIT:
            raise GuardExceededError("in-degree too large for exhaustive deviation check")
        current = cost_of(profile, i)
        for xi_choice in (False, True):
            for ys in itertools.product((False, True), repeat=len(in_pos)):
                x = list(profile.x)
                y = list(profile.y)
                x[i] = xi_choice
                for p, v in zip(in_pos, ys):
                    y[p] = v
                alt = SecurityProfile(tuple(x), tuple(y))
                if alt == profile:
                    continue
                if cost_of(alt, i) < current - tol:
                    return False
    return True


def _coalition_mask(net: SecurityNetwork, coalition: Iterable[int]) -> int:
    members = list(coalition)
    for i in members:
        if not 0 <= i < net.n:
            raise ValidationError(f"unknown player {i}")
    return to_mask(members)
