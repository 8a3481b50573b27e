"""The coalitional cost game ``(N, c)`` induced by a security network.

Shapley values (exact, closed form, sampled), extreme core allocations,
core membership, submodularity and minimal rational security sets.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import settings
from .errors import GuardExceededError, ValidationError
from .network import Allocation, SecurityNetwork, from_mask, to_mask
from .strategies import CoalitionOracle, cost_table

SHAPLEY_LIMIT = 16
CORE_LIMIT = 20
SUBMODULAR_LIMIT = 12
MRS_LIMIT = 16


def _popcounts(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        pc += (masks >> i) & 1
    return pc


def _guard(n: int, limit: int, what: str) -> None:
    if n > limit:
        raise GuardExceededError(f"{what} is limited to {limit} players (got {n})")


def shapley_exact(net: SecurityNetwork, costs: np.ndarray | None = None) -> Allocation:
    """Exact Shapley value from the full coalition cost table."""
    n = net.n
    _guard(n, SHAPLEY_LIMIT, "exact Shapley")
    if n == 0:
        return Allocation(np.zeros(0))
    c = cost_table(net) if costs is None else np.asarray(costs, float)
    pc = _popcounts(n)
    weight = np.array([math.factorial(k) * math.factorial(n - k - 1) / math.factorial(n)
                       for k in range(n)])
    masks = np.arange(1 << n, dtype=np.int64)
    phi = np.zeros(n)
    for i in range(n):
        without = masks[((masks >> i) & 1) == 0]
        phi[i] = np.sum(weight[pc[without]] * (c[without | (1 << i)] - c[without]))
    return Allocation(phi)


def closed_form_applicable(net: SecurityNetwork) -> bool:
    """Every penalty strictly exceeds the full independent securing cost."""
    return all(net.penalty[i] > net.theta[i] + net.in_cost(i) for i in range(net.n))


def shapley_closed_form(net: SecurityNetwork) -> Allocation:
    """Shapley value when everyone is independently secured with slack.

    Each player pays its own theta plus half of each in-link, minus half of
    each out-link.
    """
    if not closed_form_applicable(net):
        raise ValidationError("closed form needs penalty > theta + in-link costs for every player")
    return Allocation([net.theta[i] + net.in_cost(i) / 2 - net.out_cost(i) / 2
                       for i in range(net.n)])


@dataclass(frozen=True)
class ShapleyEstimate:
    allocation: Allocation
    stderr: np.ndarray
    samples: int


def shapley_monte_carlo(net: SecurityNetwork, samples: int, seed: int = 0) -> ShapleyEstimate:
    """Average marginal costs over uniformly random player orders.

    Uses numpy's PCG64 generator seeded with ``seed``; results are
    reproducible across platforms.
    """
    if samples < 1:
        raise ValidationError("samples must be positive")
    n = net.n
    rng = np.random.Generator(np.random.PCG64(seed))
    oracle = CoalitionOracle(net)
    draws = np.zeros((samples, n))
    for k in range(samples):
        order = rng.permutation(n)
        draws[k] = _marginals(oracle, [int(v) for v in order])
    mean = draws.mean(axis=0)
    stderr = draws.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.full(n, np.inf)
    return ShapleyEstimate(Allocation(mean), stderr, samples)


def _marginals(oracle: CoalitionOracle, order: Sequence[int]) -> np.ndarray:
    out = np.zeros(oracle.net.n)
    mask = 0
    prev = 0.0
    for i in order:
        mask |= 1 << i
        cur = oracle.cost(mask)
        out[i] = cur - prev
        prev = cur
    return out


def extreme_core_allocation(net: SecurityNetwork, order: Sequence[int],
                            oracle: CoalitionOracle | None = None) -> Allocation:
    """Marginal cost vector along ``order`` (a permutation of the players)."""
    order = [int(v) for v in order]
    if sorted(order) != list(range(net.n)):
        raise ValidationError("order must be a permutation of the players")
    return Allocation(_marginals(oracle or CoalitionOracle(net), order))


def core_violation(net: SecurityNetwork, alloc: Allocation | Sequence[float],
                   costs: np.ndarray | None = None) -> frozenset[int] | None:
    """Most violated coalition for ``alloc``, or ``None`` if it is in the core.

    The grand coalition is returned when the allocation is not efficient.
    """
    n = net.n
    _guard(n, CORE_LIMIT, "core check")
    shares = np.asarray(alloc.shares if isinstance(alloc, Allocation) else alloc, float)
    c = cost_table(net) if costs is None else costs
    sums = np.zeros(1 << n)
    for i in range(n):
        view = sums.reshape(-1, 2, 1 << i)
        view[:, 1, :] += shares[i]
    scale = max(1.0, float(np.abs(c).max()))
    tol = settings.TOL * scale
    if abs(sums[-1] - c[-1]) > tol:
        return frozenset(range(n))
    excess = sums - c
    worst = int(np.argmax(excess))
    if excess[worst] > tol:
        return from_mask(worst)
    return None


def is_core_allocation(net: SecurityNetwork, alloc: Allocation | Sequence[float],
                       costs: np.ndarray | None = None) -> bool:
    """Efficient and no coalition pays more than its stand-alone cost."""
    return core_violation(net, alloc, costs) is None


def is_submodular(net: SecurityNetwork, costs: np.ndarray | None = None) -> bool:
    """Check decreasing marginal costs on every coalition pair.

    Verifies ``c(S+i) + c(S+j) >= c(S+i+j) + c(S)`` for all ``S`` and
    ``i, j`` outside it, which is equivalent to the general condition.
    """
    n = net.n
    _guard(n, SUBMODULAR_LIMIT, "submodularity check")
    c = cost_table(net) if costs is None else costs
    masks = np.arange(1 << n, dtype=np.int64)
    tol = settings.TOL * max(1.0, float(np.abs(c).max()))
    for i in range(n):
        for j in range(i + 1, n):
            base = masks[(((masks >> i) | (masks >> j)) & 1) == 0]
            lhs = c[base | (1 << i)] + c[base | (1 << j)]
            rhs = c[base | (1 << i) | (1 << j)] + c[base]
            if np.any(lhs < rhs - tol):
                return False
    return True


def minimal_rational_security_sets(net: SecurityNetwork, i: int,
                                   oracle: CoalitionOracle | None = None) -> list[frozenset[int]]:
    """Smallest partner sets ``P`` that make securing ``i`` optimal for ``P + i``.

    ``P`` qualifies when ``i`` belongs to the maximal optimal secured set of
    ``P + i`` and no proper subset of ``P`` already does.
    """
    n = net.n
    _guard(n, MRS_LIMIT, "minimal rational security sets")
    oracle = oracle or CoalitionOracle(net)
    others = [k for k in range(n) if k != i]
    found: list[int] = []
    bit = 1 << i
    for r in range(n):
        for combo in itertools.combinations(others, r):
            p = to_mask(combo)
            if any(f & p == f for f in found):
                continue
            if oracle.secured(p | bit) & bit:
                found.append(p)
    return [from_mask(f) for f in found]


class BilateralVerdict(enum.Enum):
    IMPLEMENTABLE = "implementable"
    NOT_IMPLEMENTABLE = "not_implementable"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class BilateralReport:
    verdict: BilateralVerdict
    partner_union: tuple[frozenset[int], ...]
    witness: tuple[int, int] | None = None


def classify_shapley_bilateral(net: SecurityNetwork) -> BilateralReport:
    """Decide whether the Shapley value can be paid via neighbour-only contracts.

    Let ``U(j)`` be the union of ``j``'s minimal rational security sets.
    Implementable when no player lies in ``U(j)`` of a neighbour ``j`` that
    has more than one neighbour. Not implementable when some ``i`` lies in
    ``U(j)`` of a neighbour ``j`` with more than one neighbour outside
    ``i``'s neighbourhood. Otherwise indeterminate. ``witness`` is the
    offending ``(i, j)`` pair.
    """
    oracle = CoalitionOracle(net)
    union = tuple(frozenset().union(*minimal_rational_security_sets(net, j, oracle))
                  for j in range(net.n))
    nbrs = [net.neighbors(i) for i in range(net.n)]
    for i in range(net.n):
        for j in sorted(nbrs[i]):
            if i in union[j] and len(nbrs[j] - nbrs[i]) > 1:
                return BilateralReport(BilateralVerdict.NOT_IMPLEMENTABLE, union, (i, j))
    for i in range(net.n):
        for j in sorted(nbrs[i]):
            if len(nbrs[j]) > 1 and i in union[j]:
                return BilateralReport(BilateralVerdict.INDETERMINATE, union, (i, j))
    return BilateralReport(BilateralVerdict.IMPLEMENTABLE, union)


def all_permutations_average(net: SecurityNetwork, orders=None) -> Allocation:
    """Mean extreme core allocation over ``orders`` (all ``n!`` orders by default)."""
    oracle = CoalitionOracle(net)
    orders = list(itertools.permutations(range(net.n)) if orders is None else orders)
    if not orders:
        raise ValidationError("no orders to average")
    acc = np.zeros(net.n)
    for order in orders:
        acc += _marginals(oracle, order)
    return Allocation(acc / len(orders))
