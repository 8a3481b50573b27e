"""Directed risk networks and the per-player cost model.

Players are integers ``0..n-1``. An arc ``(j, i)`` means risk can travel
from ``j`` to ``i``; player ``i`` pays ``xi`` to secure that link. Each
player also has an intrinsic cost ``theta`` of securing itself and a
``penalty`` incurred when it ends up unsecured.

Coalitions are plain ``frozenset[int]`` at the public API and Python int
bitmasks internally (arbitrary width, so there is no 64-player ceiling).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import settings
from .errors import ValidationError

Arc = tuple[int, int]
Coalition = frozenset


def to_mask(members: Iterable[int]) -> int:
    mask = 0
    for i in members:
        mask |= 1 << i
    return mask


def from_mask(mask: int) -> frozenset[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def mask_members(mask: int) -> list[int]:
    return sorted(from_mask(mask))


@dataclass(frozen=True)
class SecurityNetwork:
    """Immutable network with per-node and per-arc costs.

    Args:
        theta: intrinsic securing cost per player.
        penalty: loss per player when unsecured.
        arcs: directed arcs ``(tail, head)``; the head pays the link cost.
        xi: link cost per arc, aligned with ``arcs``.
        labels: external ids used for (de)serialization.
        public: players whose security state is public information.
    """

    theta: tuple[float, ...]
    penalty: tuple[float, ...]
    arcs: tuple[Arc, ...] = ()
    xi: tuple[float, ...] = ()
    labels: tuple[str, ...] | None = None
    public: frozenset[int] = frozenset()

    n: int = field(init=False, repr=False, compare=False)
    in_arcs: tuple[tuple[tuple[int, float], ...], ...] = field(init=False, repr=False, compare=False)
    out_arcs: tuple[tuple[tuple[int, float], ...], ...] = field(init=False, repr=False, compare=False)
    link: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        theta = tuple(float(v) for v in self.theta)
        penalty = tuple(float(v) for v in self.penalty)
        arcs = tuple((int(a), int(b)) for a, b in self.arcs)
        xi = tuple(float(v) for v in self.xi)
        n = len(theta)
        if len(penalty) != n:
            raise ValidationError("theta and penalty must have the same length")
        if len(xi) != len(arcs):
            raise ValidationError("xi must have one entry per arc")
        for name, vals in (("theta", theta), ("L", penalty), ("xi", xi)):
            for v in vals:
                if not math.isfinite(v):
                    raise ValidationError(f"non-finite {name} value {v}")
                if v < 0:
                    raise ValidationError(f"negative {name} value {v}")
        link: dict[Arc, float] = {}
        ins: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        outs: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for (j, i), c in zip(arcs, xi):
            if not (0 <= j < n and 0 <= i < n):
                raise ValidationError(f"arc ({j}, {i}) references an unknown node")
            if i == j:
                raise ValidationError(f"self-loop on node {i}")
            if (j, i) in link:
                raise ValidationError(f"duplicate arc ({j}, {i})")
            link[(j, i)] = c
            ins[i].append((j, c))
            outs[j].append((i, c))
        public = frozenset(int(p) for p in self.public)
        if any(not 0 <= p < n for p in public):
            raise ValidationError("public set references an unknown node")
        labels = self.labels
        if labels is not None:
            labels = tuple(str(x) for x in labels)
            if len(labels) != n or len(set(labels)) != n:
                raise ValidationError("labels must be unique and one per node")
        set_ = object.__setattr__
        set_(self, "theta", theta)
        set_(self, "penalty", penalty)
        set_(self, "arcs", arcs)
        set_(self, "xi", xi)
        set_(self, "labels", labels)
        set_(self, "public", public)
        set_(self, "n", n)
        set_(self, "in_arcs", tuple(tuple(a) for a in ins))
        set_(self, "out_arcs", tuple(tuple(a) for a in outs))
        set_(self, "link", link)

    @classmethod
    def from_links(
        cls,
        theta: Sequence[float],
        penalty: Sequence[float],
        links: Mapping[Arc, float],
        labels: Sequence[str] | None = None,
        public: Iterable[int] = (),
    ) -> "SecurityNetwork":
        """Build from a ``{(tail, head): xi}`` mapping."""
        arcs = tuple(links)
        return cls(tuple(theta), tuple(penalty), arcs, tuple(links[a] for a in arcs),
                   None if labels is None else tuple(labels), frozenset(public))

    @property
    def m(self) -> int:
        return len(self.arcs)

    @property
    def players(self) -> frozenset[int]:
        return frozenset(range(self.n))

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)

    def in_neighbors(self, i: int) -> list[int]:
        return [j for j, _ in self.in_arcs[i]]

    def out_neighbors(self, i: int) -> list[int]:
        return [j for j, _ in self.out_arcs[i]]

    def neighbors(self, i: int) -> frozenset[int]:
        """Players adjacent to ``i`` in either direction."""
        return frozenset(self.in_neighbors(i)) | frozenset(self.out_neighbors(i))

    def in_cost(self, i: int, from_mask: int | None = None) -> float:
        """Sum of link costs ``i`` pays on arcs whose tail lies in ``from_mask``."""
        if from_mask is None:
            return sum(c for _, c in self.in_arcs[i])
        return sum(c for j, c in self.in_arcs[i] if from_mask >> j & 1)

    def out_cost(self, i: int, to_mask: int | None = None) -> float:
        """Sum of link costs others pay on arcs out of ``i`` into ``to_mask``."""
        if to_mask is None:
            return sum(c for _, c in self.out_arcs[i])
        return sum(c for j, c in self.out_arcs[i] if to_mask >> j & 1)

    def replace(self, **changes: Any) -> "SecurityNetwork":
        """Copy with some fields replaced (``theta``, ``penalty``, ``xi``, ``public``...)."""
        kw = dict(theta=self.theta, penalty=self.penalty, arcs=self.arcs, xi=self.xi,
                  labels=self.labels, public=self.public)
        kw.update(changes)
        return SecurityNetwork(**kw)

    def with_public(self, public: Iterable[int]) -> "SecurityNetwork":
        return self.replace(public=frozenset(public))

    def induced(self, keep: Iterable[int]) -> tuple["SecurityNetwork", list[int]]:
        """Subnetwork on ``keep``; returns it with the new->old id map."""
        old = sorted(set(keep))
        new_of = {o: k for k, o in enumerate(old)}
        links = {(new_of[j], new_of[i]): c for (j, i), c in zip(self.arcs, self.xi)
                 if j in new_of and i in new_of}
        labels = None if self.labels is None else [self.labels[o] for o in old]
        sub = SecurityNetwork.from_links([self.theta[o] for o in old],
                                         [self.penalty[o] for o in old], links, labels,
                                         [new_of[p] for p in self.public if p in new_of])
        return sub, old


@dataclass(frozen=True)
class SecurityProfile:
    """Joint action: ``x[i]`` secures player ``i``; ``y[a]`` secures arc ``a``.

    ``y`` is aligned with ``SecurityNetwork.arcs``.
    """

    x: tuple[bool, ...]
    y: tuple[bool, ...]

    @classmethod
    def from_secured(cls, net: SecurityNetwork, secured: Iterable[int]) -> "SecurityProfile":
        """Profile that secures exactly ``secured`` and links only to unsecured tails."""
        mask = to_mask(secured)
        x = tuple(bool(mask >> i & 1) for i in range(net.n))
        y = tuple(bool(mask >> i & 1) and not mask >> j & 1 for j, i in net.arcs)
        return cls(x, y)

    @classmethod
    def idle(cls, net: SecurityNetwork) -> "SecurityProfile":
        return cls((False,) * net.n, (False,) * net.m)


@dataclass(frozen=True)
class Allocation:
    """Cost shares, one per player. ``total`` is their sum."""

    shares: np.ndarray
    total: float = field(init=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.shares, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "shares", arr)
        object.__setattr__(self, "total", float(arr.sum()))

    def __len__(self) -> int:
        return len(self.shares)

    def __getitem__(self, i: int) -> float:
        return float(self.shares[i])

    def tolist(self) -> list[float]:
        return [float(v) for v in self.shares]

    def allclose(self, other: "Allocation | Sequence[float]", atol: float = 1e-9) -> bool:
        other_arr = other.shares if isinstance(other, Allocation) else np.asarray(other, float)
        return bool(np.allclose(self.shares, other_arr, atol=atol, rtol=0))


@dataclass(frozen=True)
class PartitionStructure:
    """Ordered partition of the players into disjoint coalitions."""

    blocks: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        blocks = tuple(frozenset(b) for b in self.blocks)
        seen: set[int] = set()
        for b in blocks:
            if not b:
                raise ValidationError("empty coalition in partition")
            if seen & b:
                raise ValidationError("coalitions in a partition must be disjoint")
            seen |= b
        object.__setattr__(self, "blocks", blocks)

    def check_covers(self, n: int) -> None:
        covered = set().union(*self.blocks) if self.blocks else set()
        if covered != set(range(n)):
            raise ValidationError("partition does not cover every player")

    @classmethod
    def singletons(cls, n: int) -> "PartitionStructure":
        return cls(tuple(frozenset({i}) for i in range(n)))

    @classmethod
    def grand(cls, n: int) -> "PartitionStructure":
        return cls((frozenset(range(n)),))

    @classmethod
    def split(cls, n: int, coalition: Iterable[int], rest: str = "together") -> "PartitionStructure":
        """``coalition`` as one block; the others as one block or as singletons."""
        s = frozenset(coalition)
        others = [i for i in range(n) if i not in s]
        if rest == "together":
            tail = (frozenset(others),) if others else ()
        elif rest == "singletons":
            tail = tuple(frozenset({i}) for i in others)
        else:
            raise ValidationError(f"unknown residual mode {rest!r}")
        return cls((s,) + tail)

    def block_of(self, i: int) -> frozenset[int]:
        for b in self.blocks:
            if i in b:
                return b
        raise KeyError(i)


# -- cost model ---------------------------------------------------------------

def _believed_secure(beliefs, j: int, i: int) -> bool:
    if beliefs is None:
        return False
    if callable(beliefs):
        return bool(beliefs(j, i))
    return bool(beliefs.get((j, i), False))


def security_state(net: SecurityNetwork, profile: SecurityProfile, beliefs=None) -> tuple[bool, ...]:
    """Security state of every player as judged by that player.

    ``i`` is secure iff it invested and secured every in-link whose tail it
    does not believe to be secure. ``beliefs`` maps ``(j, i)`` to whether
    ``i`` believes ``j`` is secure (a dict or a callable); ``None`` means
    worst-case beliefs.
    """
    _check_profile(net, profile)
    y = {a: v for a, v in zip(net.arcs, profile.y)}
    out = []
    for i in range(net.n):
        ok = profile.x[i]
        if ok:
            for j, _ in net.in_arcs[i]:
                if not y[(j, i)] and not _believed_secure(beliefs, j, i):
                    ok = False
                    break
        out.append(bool(ok))
    return tuple(out)


def player_cost(net: SecurityNetwork, profile: SecurityProfile, i: int, beliefs=None) -> float:
    """Penalty if unsecured, plus own investment and secured in-links."""
    _check_profile(net, profile)
    state = security_state(net, profile, beliefs)[i]
    cost = 0.0 if state else net.penalty[i]
    if profile.x[i]:
        cost += net.theta[i]
    for (j, h), c, on in zip(net.arcs, net.xi, profile.y):
        if h == i and on:
            cost += c
    return cost


def actual_security(net: SecurityNetwork, profile: SecurityProfile) -> tuple[bool, ...]:
    """States under accurate beliefs: the largest self-consistent secure set.

    Start from every investing player and drop anyone with an unsecured
    in-link whose tail has already been dropped, until nothing changes.
    """
    _check_profile(net, profile)
    y = {a: v for a, v in zip(net.arcs, profile.y)}
    secure = list(profile.x)
    changed = True
    while changed:
        changed = False
        for i in range(net.n):
            if secure[i] and any(not y[(j, i)] and not secure[j] for j, _ in net.in_arcs[i]):
                secure[i] = False
                changed = True
    return tuple(bool(s) for s in secure)


def _check_profile(net: SecurityNetwork, profile: SecurityProfile) -> None:
    if len(profile.x) != net.n or len(profile.y) != net.m:
        raise ValidationError("profile does not match the network shape")


# -- serialization -------------------------------------------------------------

def _sort_key(label: str):
    try:
        return (0, int(label), label)
    except ValueError:
        return (1, 0, label)


def network_from_dict(data: Mapping[str, Any]) -> SecurityNetwork:
    """Parse the ``{"nodes": [...], "arcs": [...], "public": [...]}`` format.

    Dense ids follow sorted label order (numeric labels numerically).
    """
    try:
        nodes = data["nodes"]
        arcs = data.get("arcs", [])
    except (TypeError, KeyError) as exc:
        raise ValidationError(f"missing field: {exc}") from None
    labels = []
    theta = []
    penalty = []
    for node in nodes:
        try:
            labels.append(str(node["id"]))
            theta.append(float(node["theta"]))
            penalty.append(float(node["L"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad node entry {node!r}: {exc}") from None
    if len(set(labels)) != len(labels):
        raise ValidationError("duplicate node id")
    order = sorted(range(len(labels)), key=lambda k: _sort_key(labels[k]))
    labels = [labels[k] for k in order]
    theta = [theta[k] for k in order]
    penalty = [penalty[k] for k in order]
    index = {lab: k for k, lab in enumerate(labels)}
    links: dict[Arc, float] = {}
    for arc in arcs:
        try:
            a, b, c = str(arc["from"]), str(arc["to"]), float(arc["xi"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad arc entry {arc!r}: {exc}") from None
        if a not in index or b not in index:
            raise ValidationError(f"arc {a}->{b} references an unknown node")
        key = (index[a], index[b])
        if key in links:
            raise ValidationError(f"duplicate arc {a}->{b}")
        links[key] = c
    public = []
    for p in data.get("public", []) or []:
        if str(p) not in index:
            raise ValidationError(f"public id {p} is not a node")
        public.append(index[str(p)])
    return SecurityNetwork.from_links(theta, penalty, links, labels, public)


def network_to_dict(net: SecurityNetwork) -> dict[str, Any]:
    """Canonical dict: nodes sorted by id, arcs sorted by (from, to)."""
    labels = [net.label(i) for i in range(net.n)]
    order = sorted(range(net.n), key=lambda i: _sort_key(labels[i]))
    pos = {i: k for k, i in enumerate(order)}
    nodes = [{"id": _jsonable_id(labels[i]), "theta": net.theta[i], "L": net.penalty[i]}
             for i in order]
    arcs = sorted(zip(net.arcs, net.xi), key=lambda t: (pos[t[0][0]], pos[t[0][1]]))
    out: dict[str, Any] = {
        "nodes": nodes,
        "arcs": [{"from": _jsonable_id(labels[j]), "to": _jsonable_id(labels[i]), "xi": c}
                 for (j, i), c in arcs],
    }
    if net.public:
        out["public"] = [_jsonable_id(labels[i]) for i in sorted(net.public, key=pos.get)]
    return out


def _jsonable_id(label: str):
    try:
        if str(int(label)) == label:
            return int(label)
    except ValueError:
        pass
    return label


def load_network(source) -> SecurityNetwork:
    """Load from a path, a JSON string, or an already-parsed dict."""
    if isinstance(source, Mapping):
        return network_from_dict(source)
    text = str(source)
    if not text.lstrip().startswith("{"):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from None
    return network_from_dict(data)


def dump_network(net: SecurityNetwork, path=None) -> str:
    """Serialize canonically; writes to ``path`` when given and returns the text."""
    text = json.dumps(network_to_dict(net), indent=2) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def network_hash(net: SecurityNetwork) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(dump_network(net).encode()).hexdigest()


# -- reduction -------------------------------------------------------------------

@dataclass(frozen=True)
class Reduction:
    """Result of stripping players who stay unsecured in the social optimum.

    ``network`` holds the survivors, ``kept[k]`` is the original id of its
    player ``k`` and ``removed`` lists the original ids that were dropped.
    """

    network: SecurityNetwork
    kept: tuple[int, ...]
    removed: frozenset[int]
    rounds: int


def reduce_network(net: SecurityNetwork) -> Reduction:
    """Repeatedly drop unsecured players, folding their out-links into theta.

    A dropped player ``i`` is permanently unsecured, so each out-neighbour
    ``j`` that survives must always pay ``xi[i, j]``; that cost moves into
    ``theta[j]``. Repeats until the optimum secures everyone left.
    """
    from .strategies import network_optimal

    current = net
    kept = list(range(net.n))
    removed: set[int] = set()
    rounds = 0
    while current.n:
        secured = network_optimal(current).secured
        if len(secured) == current.n:
            break
        rounds += 1
        drop = [i for i in range(current.n) if i not in secured]
        theta = list(current.theta)
        for i in drop:
            for j, c in current.out_arcs[i]:
                theta[j] += c
        current = current.replace(theta=tuple(theta))
        sub, old = current.induced(secured)
        removed.update(kept[i] for i in drop)
        kept = [kept[o] for o in old]
        current = sub
    return Reduction(current, tuple(kept), frozenset(removed), rounds)
