"""Security games when some players' security state is observable.

Under *private* information every outsider is assumed unsecured. Under
*public* information coalitions see who else is secured and stop paying for
those links. The *partial* model makes only ``net.public`` observable.

Coalition structures are :class:`~coopsec.network.PartitionStructure`
objects. Equilibria are found by letting each block best-respond in turn
until no newly secured observable player appears.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from . import settings
from .agreeable import joins_after, require_reduced
from .errors import GuardExceededError, ValidationError
from .mincut import AuxiliaryGraph, min_cut
from .network import Allocation, PartitionStructure, SecurityNetwork, from_mask, to_mask
from .strategies import CoalitionOracle, network_optimal

STABILITY_LIMIT = 16

Information = Literal["private", "public", "partial"]


@dataclass(frozen=True)
class Equilibrium:
    secured: frozenset[int]
    block_secured: tuple[frozenset[int], ...]
    rounds: int
    observed: frozenset[int] = field(default=frozenset())


def _public_mask(net: SecurityNetwork, information: Information) -> int:
    if information == "public":
        return net.full_mask
    if information == "partial":
        return to_mask(net.public)
    if information == "private":
        return 0
    raise ValidationError(f"unknown information model {information!r}")


def public_independent_equilibrium(net: SecurityNetwork) -> Equilibrium:
    """Players secure one at a time once the links they must still pay are cheap enough.

    A player is added as soon as its penalty covers its own cost plus the
    in-links from players not yet secured. Sweeps repeat until stable.
    """
    tol = settings.TOL
    secured = 0
    rounds = 0
    changed = True
    while changed:
        changed = False
        rounds += 1
        for i in range(net.n):
            if secured >> i & 1:
                continue
            if net.penalty[i] >= net.theta[i] + net.in_cost(i, ~secured) - tol:
                secured |= 1 << i
                changed = True
    s = from_mask(secured)
    return Equilibrium(s, tuple(frozenset({i}) & s for i in range(net.n)), rounds, s)


def partial_independent_equilibrium(net: SecurityNetwork) -> Equilibrium:
    """Singleton equilibrium when only ``net.public`` is observable.

    Observable players first play the public game among themselves, each
    also paying for every in-link from an unobservable player. Every other
    player then secures iff its penalty covers theta plus in-links from
    unobservable players and from observable players left unsecured.
    """
    tol = settings.TOL
    public = to_mask(net.public)
    secured = 0
    changed = True
    rounds = 0
    while changed:
        changed = False
        rounds += 1
        for i in sorted(net.public):
            if secured >> i & 1:
                continue
            if net.penalty[i] >= net.theta[i] + net.in_cost(i, ~secured) - tol:
                secured |= 1 << i
                changed = True
    for i in range(net.n):
        if public >> i & 1:
            continue
        if net.penalty[i] >= net.theta[i] + net.in_cost(i, ~(secured & public)) - tol:
            secured |= 1 << i
    s = from_mask(secured)
    return Equilibrium(s, tuple(frozenset({i}) & s for i in range(net.n)), rounds,
                       s & net.public)


def coalition_equilibrium(net: SecurityNetwork, rho: PartitionStructure,
                          information: Information = "public") -> Equilibrium:
    """Blocks of ``rho`` best-respond in order until nothing new is observed.

    A block treats an outsider as secured only if that outsider is
    observable and already known to be secured; every other outsider is
    treated as unsecured.
    """
    rho.check_covers(net.n)
    observable = _public_mask(net, information)
    aux = AuxiliaryGraph(net)
    blocks = [to_mask(b) for b in rho.blocks]
    known = 0
    solution = [0] * len(blocks)
    rounds = 0
    while True:
        rounds += 1
        added = False
        for k, b in enumerate(blocks):
            unsecured = [i for i in range(net.n) if not b >> i & 1 and not known >> i & 1]
            secured = [i for i in range(net.n) if not b >> i & 1 and known >> i & 1]
            cut = min_cut(aux, forced_source=unsecured, forced_sink=secured)
            solution[k] = cut.secured_mask & b
            new = solution[k] & observable & ~known
            if new:
                known |= new
                added = True
        if not added:
            break
    total = 0
    for s in solution:
        total |= s
    return Equilibrium(from_mask(total), tuple(from_mask(s) for s in solution), rounds,
                       from_mask(known))


def audit_equilibrium(net: SecurityNetwork, rho: PartitionStructure, eq: Equilibrium,
                      information: Information = "public") -> bool:
    """True when no block can strictly lower its cost by re-optimizing against ``eq``."""
    tol = settings.TOL
    aux = AuxiliaryGraph(net)
    known = to_mask(eq.observed) & _public_mask(net, information)
    for block in rho.blocks:
        b = to_mask(block)
        unsecured = [i for i in range(net.n) if not b >> i & 1 and not known >> i & 1]
        secured = [i for i in range(net.n) if not b >> i & 1 and known >> i & 1]
        best = from_mask(min_cut(aux, unsecured, secured).secured_mask & b)
        alt = Equilibrium(eq.secured - block | best, eq.block_secured, eq.rounds, eq.observed)
        if block_cost(net, block, alt, information) < block_cost(net, block, eq, information) - tol:
            return False
    return True


def public_coalition_equilibrium(net: SecurityNetwork, rho: PartitionStructure) -> Equilibrium:
    return coalition_equilibrium(net, rho, "public")


def partial_coalition_equilibrium(net: SecurityNetwork, rho: PartitionStructure) -> Equilibrium:
    return coalition_equilibrium(net, rho, "partial")


def block_cost(net: SecurityNetwork, block: Iterable[int], eq: Equilibrium,
               information: Information = "public") -> float:
    """Equilibrium cost of one block.

    A secured member pays theta plus every in-link except those from
    players it knows are secured: secured block-mates, and secured
    observable outsiders.
    """
    bmask = to_mask(block)
    secured = to_mask(eq.secured)
    known_outside = to_mask(eq.observed) & _public_mask(net, information)
    safe = (secured & bmask) | (known_outside & ~bmask)
    total = 0.0
    for i in range(net.n):
        if not bmask >> i & 1:
            continue
        if secured >> i & 1:
            total += net.theta[i] + net.in_cost(i, ~safe)
        else:
            total += net.penalty[i]
    return total


def _block_index(rho: PartitionStructure, coalition: frozenset[int]) -> int:
    for k, b in enumerate(rho.blocks):
        if b == coalition:
            return k
    raise ValidationError("coalition must be a block of the partition")


def partition_cost(net: SecurityNetwork, coalition: Iterable[int], rho: PartitionStructure,
                   information: Information = "public") -> float:
    """Cost to ``coalition`` (a block of ``rho``) in the equilibrium of ``rho``."""
    s = frozenset(coalition)
    if not s:
        return 0.0
    _block_index(rho, s)
    if information == "private":
        return CoalitionOracle(net).cost(to_mask(s))
    eq = coalition_equilibrium(net, rho, information)
    return block_cost(net, s, eq, information)


def partial_partition_cost(net: SecurityNetwork, coalition: Iterable[int],
                           rho: PartitionStructure) -> float:
    return partition_cost(net, coalition, rho, "partial")


@dataclass(frozen=True)
class StabilityReport:
    """Whether some efficient split of ``c(N)`` survives every deviation threat.

    ``bounds`` maps each proper coalition to what it would pay on its own.
    ``best_total`` is the most the players can be charged in total without
    any coalition preferring to leave. ``blocking`` lists the coalitions
    whose bounds jointly rule out ``grand_cost``.
    """

    stable: bool
    grand_cost: float
    best_total: float
    bounds: dict
    blocking: tuple[frozenset[int], ...]


def grand_coalition_deviation_check(net: SecurityNetwork, information: Information = "public",
                                    residual: str = "together") -> StabilityReport:
    """Check the grand coalition against every deviating coalition.

    A deviating ``S`` faces the rest as one block (``residual="together"``)
    or as singletons. Stability is decided exactly by a linear program over
    all coalition bounds; the dual solution names the blocking coalitions.
    """
    from scipy.optimize import linprog

    n = net.n
    if n > STABILITY_LIMIT:
        raise GuardExceededError(f"stability check is limited to {STABILITY_LIMIT} players")
    grand = network_optimal(net).cost
    if n <= 1:
        return StabilityReport(True, grand, grand, {}, ())
    oracle = CoalitionOracle(net)
    coalitions = []
    bounds = {}
    for mask in range(1, (1 << n) - 1):
        s = from_mask(mask)
        if information == "private":
            b = oracle.cost(mask)
        else:
            rho = PartitionStructure.split(n, s, residual)
            eq = coalition_equilibrium(net, rho, information)
            b = block_cost(net, s, eq, information)
        coalitions.append(s)
        bounds[s] = b
    a = np.array([[1.0 if i in s else 0.0 for i in range(n)] for s in coalitions])
    rhs = np.array([bounds[s] for s in coalitions])
    res = linprog(-np.ones(n), A_ub=a, b_ub=rhs, bounds=[(None, None)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"stability LP failed: {res.message}")
    best = -float(res.fun)
    tol = settings.TOL * max(1.0, abs(grand)) * 10
    stable = best >= grand - tol
    blocking: tuple[frozenset[int], ...] = ()
    if not stable:
        duals = -np.asarray(res.ineqlin.marginals)
        blocking = tuple(s for s, d in zip(coalitions, duals) if d > 1e-9)
    return StabilityReport(stable, grand, best, bounds, blocking)


# -- agreeable allocations with observable security ----------------------------

@dataclass(frozen=True)
class PublicFamily:
    """Alternating waves: odd waves secure on their own, even waves join the coalition."""

    sets: tuple[frozenset[int], ...]
    exists: bool


def public_family(net: SecurityNetwork, check_reduced: bool = True) -> PublicFamily:
    """Waves under full observability.

    Wave 1 is the public singleton equilibrium. An even wave holds outsiders
    that would secure themselves by joining the coalition of everyone so
    far. An odd wave holds players secured in the equilibrium where everyone
    so far forms one coalition and the rest act alone.
    """
    if check_reduced:
        require_reduced(net)
    n = net.n
    oracle = CoalitionOracle(net)
    sets = [public_independent_equilibrium(net).secured]
    covered = to_mask(sets[0])
    stalled = 0
    k = 1
    while covered != net.full_mask and stalled < 2:
        k += 1
        if k % 2 == 0:
            wave = frozenset(i for i in range(n) if not covered >> i & 1
                             and oracle.secured(covered | 1 << i) >> i & 1)
        else:
            block = from_mask(covered)
            rho = PartitionStructure((block,) + tuple(frozenset({i}) for i in range(n)
                                                      if i not in block)) if block else \
                PartitionStructure.singletons(n)
            eq = coalition_equilibrium(net, rho, "public")
            wave = frozenset(i for i in eq.secured if not covered >> i & 1)
        sets.append(wave)
        covered |= to_mask(wave)
        stalled = 0 if wave else stalled + 1
    while len(sets) > 1 and not sets[-1]:
        sets.pop()
    return PublicFamily(tuple(sets), covered == net.full_mask)


def public_agreeable_shares(net: SecurityNetwork, family: PublicFamily) -> Allocation:
    """Cost shares for a complete public family.

    Odd-wave players pay theta plus in-links from later waves. Even-wave
    players pay theta plus in-links from beyond the next wave, split links
    inside their own wave evenly, and are credited for links into earlier
    waves. Earlier waves are then refunded the links from the next odd wave.
    """
    sets = list(family.sets)
    cum = [0]
    for s in sets:
        cum.append(cum[-1] | to_mask(s))
    last = len(sets)

    def upto(k: int) -> int:
        return cum[min(k, last)]

    def wave(k: int) -> int:
        return to_mask(sets[k - 1]) if 1 <= k <= last else 0

    x = np.zeros(net.n)
    for k in range(1, last + 1):
        if k % 2 == 1:
            for i in sets[k - 1]:
                x[i] = net.theta[i] + net.in_cost(i, ~upto(k))
        else:
            w = wave(k)
            for i in sets[k - 1]:
                x[i] = (net.theta[i] + net.in_cost(i, ~upto(k + 1)) - net.out_cost(i, upto(k - 1))
                        + net.in_cost(i, w) / 2 - net.out_cost(i, w) / 2)
            nxt = wave(k + 1)
            for i in from_mask(upto(k - 1)):
                x[i] -= net.in_cost(i, nxt)
    return Allocation(x)


def public_agreeable_allocation(net: SecurityNetwork) -> Allocation | None:
    family = public_family(net)
    if not family.exists:
        return None
    return public_agreeable_shares(net, family)


@dataclass(frozen=True)
class PartialAgreeable:
    """Result of the partial-observability construction.

    ``steps`` records each non-empty wave as ``(kind, members)`` where kind is
    ``"cascade"`` (observable players securing alone), ``"alone"``
    (unobservable players securing alone), ``"join-public"`` or
    ``"join-private"`` (players securing by joining the coalition).
    """

    steps: tuple[tuple[str, frozenset[int]], ...]
    exists: bool
    allocation: Allocation | None


def partial_agreeable(net: SecurityNetwork, check_reduced: bool = True) -> PartialAgreeable:
    """Agreeable construction when only ``net.public`` is observable.

    Three nested loops grow the secured set. The innermost lets observable
    players secure alone in cascade. The middle one adds unobservable
    players who secure alone. The outer ones add observable, then
    unobservable, players who secure by joining the coalition built so far.
    Each step charges its players and refunds or credits earlier players so
    that links between two secured players are never paid in total.
    """
    if check_reduced:
        require_reduced(net)
    n = net.n
    tol = settings.TOL
    public = to_mask(net.public)
    x = np.zeros(n)
    steps: list[tuple[str, frozenset[int]]] = []

    def alone(i: int, covered: int) -> bool:
        return net.penalty[i] >= net.theta[i] + net.in_cost(i, ~(covered & public)) - tol

    def charge_joiners(members: int, covered: int) -> None:
        for i in from_mask(members):
            x[i] = (net.theta[i] + net.in_cost(i, ~(covered | members))
                    + net.in_cost(i, members) / 2 - net.out_cost(i, members) / 2
                    - net.out_cost(i, covered))

    def cascade(base: int) -> int:
        new = 0
        while True:
            cur = base | new
            step = to_mask(i for i in range(n)
                           if public >> i & 1 and not cur >> i & 1 and alone(i, cur))
            if not step:
                break
            new |= step
        if new:
            steps.append(("cascade", from_mask(new)))
            for i in from_mask(new):
                x[i] = net.theta[i] + net.in_cost(i, ~(base | new))
            for j in from_mask(base):
                x[j] -= net.in_cost(j, new)
        return new

    def alone_private(base: int) -> int:
        acc = 0
        while True:
            odd = cascade(base | acc)
            acc |= odd
            cur = base | acc
            even = to_mask(i for i in range(n)
                           if not public >> i & 1 and not cur >> i & 1 and alone(i, cur))
            if even:
                steps.append(("alone", from_mask(even)))
                for i in from_mask(even):
                    x[i] = (net.theta[i] + net.in_cost(i, ~(cur | even))
                            + net.in_cost(i, even) / 2 - net.out_cost(i, even) / 2)
                for j in from_mask(cur):
                    x[j] -= net.in_cost(j, even)
            acc |= even
            if not odd and not even:
                return acc

    def join_public(base: int) -> int:
        acc = 0
        while True:
            odd = alone_private(base | acc)
            acc |= odd
            cur = base | acc
            even = to_mask(i for i in range(n)
                           if public >> i & 1 and not cur >> i & 1 and joins_after(net, i, cur))
            if even:
                steps.append(("join-public", from_mask(even)))
                charge_joiners(even, cur)
            acc |= even
            if not odd and not even:
                return acc

    covered = 0
    while True:
        odd = join_public(covered)
        covered |= odd
        even = to_mask(i for i in range(n)
                       if not public >> i & 1 and not covered >> i & 1
                       and joins_after(net, i, covered))
        if even:
            steps.append(("join-private", from_mask(even)))
            charge_joiners(even, covered)
        covered |= even
        if not odd and not even:
            break
    exists = covered == net.full_mask
    return PartialAgreeable(tuple(steps), exists, Allocation(x) if exists else None)


def partial_agreeable_allocation(net: SecurityNetwork) -> Allocation | None:
    return partial_agreeable(net).allocation


def independent_costs(net: SecurityNetwork, information: Information = "public") -> np.ndarray:
    """Each player's cost in the singleton equilibrium of the given model."""
    if information == "private":
        from .strategies import independent_secure_set
        secured = to_mask(independent_secure_set(net).secured)
        observed = 0
    elif information == "public":
        eq = public_independent_equilibrium(net)
        secured, observed = to_mask(eq.secured), to_mask(eq.secured)
    else:
        eq = partial_independent_equilibrium(net)
        secured, observed = to_mask(eq.secured), to_mask(eq.observed)
    out = np.zeros(net.n)
    for i in range(net.n):
        if secured >> i & 1:
            out[i] = net.theta[i] + net.in_cost(i, ~observed)
        else:
            out[i] = net.penalty[i]
    return out
