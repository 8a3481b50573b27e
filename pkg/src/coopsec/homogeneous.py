"""Networks where every player has the same theta and penalty and every link the same xi.

For these, whether agreeable waves can cover everyone depends only on
in-degree cores of the graph.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import settings
from .errors import GuardExceededError
from .network import SecurityNetwork, from_mask, to_mask

SUBSET_SEARCH_LIMIT = 20


@dataclass(frozen=True)
class HomogeneousParams:
    theta: float
    penalty: float
    xi: float


def is_quasi_homogeneous(net: SecurityNetwork, tol: float | None = None) -> HomogeneousParams | None:
    """Shared ``(theta, penalty, xi)`` if all players and links agree, else ``None``.

    A network without arcs has no link cost to share and yields ``None``.
    """
    tol = settings.TOL if tol is None else tol
    if net.n == 0 or net.m == 0:
        return None
    th, pe, xi = net.theta[0], net.penalty[0], net.xi[0]
    if any(abs(v - th) > tol for v in net.theta):
        return None
    if any(abs(v - pe) > tol for v in net.penalty):
        return None
    if any(abs(v - xi) > tol for v in net.xi):
        return None
    return HomogeneousParams(th, pe, xi)


def k_core(net: SecurityNetwork, k: int, within: frozenset[int] | None = None) -> frozenset[int]:
    """Largest set where every member has at least ``k`` in-neighbours inside it.

    Found by repeatedly peeling players with too few in-neighbours left.
    """
    alive = set(range(net.n)) if within is None else set(within)
    indeg = {i: sum(1 for j in net.in_neighbors(i) if j in alive) for i in alive}
    stack = [i for i in alive if indeg[i] < k]
    removed = set()
    while stack:
        i = stack.pop()
        if i in removed:
            continue
        removed.add(i)
        for j in net.out_neighbors(i):
            if j in alive and j not in removed:
                indeg[j] -= 1
                if indeg[j] < k:
                    stack.append(j)
    return frozenset(alive - removed)


def has_k_core(net: SecurityNetwork, k: int) -> frozenset[int] | None:
    """The non-empty ``k``-core, or ``None`` if peeling removes everyone."""
    core = k_core(net, k)
    return core or None


def core_numbers(net: SecurityNetwork) -> list[int]:
    """For each player, the largest ``k`` such that it lies in the ``k``-core."""
    indeg = [len(net.in_arcs[i]) for i in range(net.n)]
    heap = [(d, i) for i, d in enumerate(indeg)]
    heapq.heapify(heap)
    core = [0] * net.n
    done = [False] * net.n
    level = 0
    while heap:
        d, i = heapq.heappop(heap)
        if done[i] or d != indeg[i]:
            continue
        done[i] = True
        level = max(level, d)
        core[i] = level
        for j in net.out_neighbors(i):
            if not done[j]:
                indeg[j] -= 1
                heapq.heappush(heap, (indeg[j], j))
    return core


def max_out_to_rest(net: SecurityNetwork, members: frozenset[int]) -> int:
    """Largest number of out-neighbours any member has outside ``members``."""
    return max((sum(1 for j in net.out_neighbors(i) if j not in members) for i in members),
               default=0)


def min_in_within(net: SecurityNetwork, members: frozenset[int]) -> int:
    return min((sum(1 for j in net.in_neighbors(i) if j in members) for i in members), default=0)


def find_kl_core(net: SecurityNetwork, margin: int, exact: bool = True) -> frozenset[int] | None:
    """A set ``H`` whose internal in-degree is at least ``margin`` above its outward reach.

    Precisely: every member has ``>= l + margin`` in-neighbours in ``H``,
    where ``l`` is the most out-neighbours any member has outside ``H``,
    and ``margin >= 1``. Any such set sits inside the ``margin``-core, so
    the exact search only enumerates subsets of that core. Returns the
    largest such set (ties: smallest bitmask), or ``None``.

    ``exact=False`` only tries the ``(l + margin)``-cores for each ``l``.
    """
    if margin < 1:
        return None
    base = k_core(net, margin)
    if not base:
        return None
    if not exact:
        for l in range(0, net.n):
            h = k_core(net, l + margin, base)
            if h and max_out_to_rest(net, h) <= l:
                return h
        return None
    members = sorted(base)
    m = len(members)
    if m > SUBSET_SEARCH_LIMIT:
        raise GuardExceededError(f"exact search limited to cores of {SUBSET_SEARCH_LIMIT} players")
    pos = {v: k for k, v in enumerate(members)}
    size = 1 << m
    masks = np.arange(size, dtype=np.int64)
    pc = np.zeros(size, dtype=np.int64)
    for k in range(m):
        pc += (masks >> k) & 1
    big = 1 << 30
    min_in = np.full(size, big, dtype=np.int64)
    max_out = np.zeros(size, dtype=np.int64)
    for v in members:
        k = pos[v]
        in_local = to_mask(pos[j] for j in net.in_neighbors(v) if j in pos)
        out_local = to_mask(pos[j] for j in net.out_neighbors(v) if j in pos)
        out_external = sum(1 for j in net.out_neighbors(v) if j not in pos)
        has_v = ((masks >> k) & 1).astype(bool)
        indeg = _popcount(masks & in_local)
        outside = out_external + _popcount(~masks & out_local)
        min_in = np.where(has_v, np.minimum(min_in, indeg), min_in)
        max_out = np.where(has_v, np.maximum(max_out, outside), max_out)
    ok = (pc > 0) & (min_in >= max_out + margin)
    if not ok.any():
        return None
    best_size = pc[ok].max()
    pick = int(masks[ok & (pc == best_size)][0])
    return frozenset(members[k] for k in range(m) if pick >> k & 1)


def _popcount(arr: np.ndarray) -> np.ndarray:
    arr = arr & 0xFFFFFFFF
    arr = arr - ((arr >> 1) & 0x55555555)
    arr = (arr & 0x33333333) + ((arr >> 2) & 0x33333333)
    arr = (arr + (arr >> 4)) & 0x0F0F0F0F
    return (arr * 0x01010101 & 0xFFFFFFFF) >> 24


class Prediction(enum.Enum):
    EXISTS = "exists"
    NOT_EXISTS = "not_exists"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ExistencePrediction:
    verdict: Prediction
    threshold: int
    witness: frozenset[int] | None


def predict_agreeable_existence(net: SecurityNetwork, exact: bool = True) -> ExistencePrediction:
    """Predict agreeable existence from graph cores alone.

    With ``r = (penalty - theta) / xi``: if there is no ``ceil(r)``-core,
    every remaining player always has few enough unsecured in-neighbours to
    join, so the waves cover everyone. If some set ``H`` has internal
    in-degree at least ``l + q`` with ``q = floor(r) + 1`` (``l`` its largest
    outward reach), the first member of ``H`` to join would pay more than
    its penalty, so the waves stall. Otherwise the test is inconclusive.
    When ``r`` is an integer the two thresholds differ by one because a
    player exactly at break-even still joins.
    """
    params = is_quasi_homogeneous(net)
    if params is None:
        raise ValueError("network is not quasi-homogeneous")
    ratio = (params.penalty - params.theta) / params.xi
    join_q = math.ceil(ratio - settings.TOL)
    stall_q = math.floor(ratio + settings.TOL) + 1
    core = has_k_core(net, join_q) if join_q >= 1 else frozenset(range(net.n))
    if not core:
        return ExistencePrediction(Prediction.EXISTS, join_q, None)
    witness = find_kl_core(net, stall_q, exact)
    if witness is not None:
        return ExistencePrediction(Prediction.NOT_EXISTS, stall_q, witness)
    return ExistencePrediction(Prediction.INDETERMINATE, join_q, core)
