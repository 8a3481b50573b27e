"""Synthetic alliance networks, cost sampling and batch experiments.

Every run draws from its own PCG64 stream seeded with ``seed + run``, so
records do not depend on how runs are scheduled across workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import __version__, settings
from .agreeable import agreeable_family, smallest_delta
from .errors import ValidationError
from .game import closed_form_applicable
from .network import SecurityNetwork, load_network, network_hash, reduce_network
from .strategies import network_optimal

CSV_COLUMNS = ("run", "seed", "topology", "n", "m", "agreeable_exists",
               "shapley_cf_applicable", "delta_star", "grand_cost", "ms_mincut", "ms_agreeable")
CSV_SCHEMA_VERSION = 1
BOOTSTRAP_RESAMPLES = 10_000

Arc = tuple[int, int]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# -- topologies -------------------------------------------------------------------

_TOPOLOGY = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class Topology:
    """A graph family: ``star``, ``clique``, ``random_tree``, ``erdos_renyi``, ``from_file``, ``manifest``."""

    kind: str
    n: int = 0
    p: float = 0.0
    path: str = ""
    index: int = -1

    @classmethod
    def parse(cls, text: str) -> "Topology":
        match = _TOPOLOGY.match(text)
        if not match:
            raise ValidationError(f"cannot parse topology {text!r}")
        kind, args = match.group(1), [a.strip() for a in match.group(2).split(",") if a.strip()]
        try:
            if kind in ("star", "clique", "random_tree") and len(args) == 1:
                topo = cls(kind, n=int(args[0]))
            elif kind == "erdos_renyi" and len(args) == 2:
                topo = cls(kind, n=int(args[0]), p=float(args[1]))
            elif kind == "from_file" and len(args) == 1:
                topo = cls(kind, path=args[0])
            elif kind == "manifest" and len(args) == 1:
                topo = cls(kind, index=int(args[0]))
            else:
                raise ValidationError(f"unknown topology or wrong arguments: {text!r}")
        except ValueError as exc:
            raise ValidationError(f"bad topology arguments in {text!r}: {exc}") from None
        topo.validate()
        return topo

    def validate(self) -> None:
        if self.kind in ("star", "clique", "random_tree", "erdos_renyi") and self.n < 1:
            raise ValidationError("topology size must be positive")
        if self.kind == "star" and self.n < 2:
            raise ValidationError("a star needs at least 2 nodes")
        if self.kind == "erdos_renyi" and not 0.0 <= self.p <= 1.0:
            raise ValidationError("erdos_renyi p must lie in [0, 1]")

    def __str__(self) -> str:
        if self.kind == "erdos_renyi":
            return f"erdos_renyi({self.n},{self.p:g})"
        if self.kind == "from_file":
            return f"from_file({self.path})"
        if self.kind == "manifest":
            return f"manifest({self.index})"
        return f"{self.kind}({self.n})"


def _undirected(edges: Sequence[tuple[int, int]], bidirectional: bool) -> list[Arc]:
    arcs: list[Arc] = []
    for a, b in edges:
        arcs.append((a, b))
        if bidirectional:
            arcs.append((b, a))
    return arcs


def load_manifest() -> list[dict]:
    """The bundled corpus of 50 synthetic alliance networks."""
    text = resources.files("coopsec.data").joinpath("alliance_manifest.json").read_text("utf-8")
    return json.loads(text)["networks"]


def build_topology(topo: Topology, rng: np.random.Generator,
                   bidirectional: bool = True) -> tuple[int, list[Arc]]:
    """Node count and arc list ``(tail, head)`` for one draw of ``topo``.

    Stars point leaves at hub 0; with ``bidirectional`` every undirected
    edge becomes two arcs. ``from_file`` keeps the file's arcs as given.
    """
    n = topo.n
    if topo.kind == "star":
        return n, _undirected([(leaf, 0) for leaf in range(1, n)], bidirectional)
    if topo.kind == "clique":
        return n, _undirected([(a, b) for a in range(n) for b in range(a + 1, n)], bidirectional)
    if topo.kind == "random_tree":
        parents = [int(rng.integers(0, k)) for k in range(1, n)]
        return n, _undirected([(k, parents[k - 1]) for k in range(1, n)], bidirectional)
    if topo.kind == "erdos_renyi":
        if bidirectional:
            pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
        else:
            pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
        keep = rng.random(len(pairs)) < topo.p
        chosen = [pr for pr, k in zip(pairs, keep) if k]
        return n, _undirected(chosen, bidirectional)
    if topo.kind == "from_file":
        net = load_network(topo.path)
        return net.n, list(net.arcs)
    if topo.kind == "manifest":
        entries = load_manifest()
        if not 0 <= topo.index < len(entries):
            raise ValidationError(f"manifest index {topo.index} out of range")
        entry = entries[topo.index]
        return entry["n"], _undirected([tuple(e) for e in entry["edges"]], bidirectional)
    raise ValidationError(f"unknown topology kind {topo.kind!r}")


# -- cost schemes -----------------------------------------------------------------

@dataclass(frozen=True)
class CostScheme:
    """How penalties are drawn; theta and xi are always ``U[15,25]`` and ``U[3,5]``.

    ``uniform_degree``: ``L ~ U[17 + indeg, 23 + indeg]``.
    ``distance_decay``: ``L = L0 / c0 ** d`` with ``d`` the directed distance
    to the nearest node of ``consumer_set``.
    ``matched_uniform``: ``L ~ U[mu - width, mu + width]`` where ``mu`` is the
    mean of the decayed penalties, a symmetric benchmark with the same mean.
    """

    kind: str = "uniform_degree"
    L0: float = 409.6
    c0: float = 2.0
    consumer_set: tuple[int, ...] = ()
    width: float = 3.0

    def validate(self) -> None:
        if self.kind not in ("uniform_degree", "distance_decay", "matched_uniform"):
            raise ValidationError(f"unknown cost scheme {self.kind!r}")
        if self.kind != "uniform_degree":
            if not self.consumer_set:
                raise ValidationError("distance schemes need a non-empty consumer_set")
            if self.L0 <= 0:
                raise ValidationError("L0 must be positive")
            if self.c0 <= 1:
                raise ValidationError("c0 must exceed 1")
            if self.width < 0:
                raise ValidationError("width must be non-negative")


def _bfs(adj: list[list[int]], starts: Sequence[int]) -> list[int]:
    dist = [-1] * len(adj)
    queue = deque()
    for s in starts:
        if dist[s] < 0:
            dist[s] = 0
            queue.append(s)
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def consumer_distances(n: int, arcs: Sequence[Arc],
                       consumers: Sequence[int]) -> tuple[list[int], frozenset[int]]:
    """Directed hop count from each node to the nearest consumer, plus the unreachable set.

    Unreachable nodes get the network diameter (largest finite directed
    distance) plus one.
    """
    for c in consumers:
        if not 0 <= c < n:
            raise ValidationError(f"consumer {c} is not a node")
    forward = [[] for _ in range(n)]
    backward = [[] for _ in range(n)]
    for a, b in arcs:
        forward[a].append(b)
        backward[b].append(a)
    dist = _bfs(backward, consumers)
    unreachable = frozenset(i for i in range(n) if dist[i] < 0)
    if unreachable:
        diameter = max(max(_bfs(forward, [s])) for s in range(n))
        dist = [diameter + 1 if d < 0 else d for d in dist]
    return dist, unreachable


@dataclass(frozen=True)
class SampledNetwork:
    network: SecurityNetwork
    unreachable: frozenset[int] = frozenset()


def sample_costs(n: int, arcs: Sequence[Arc], scheme: CostScheme,
                 rng: np.random.Generator) -> SampledNetwork:
    """Draw theta, xi (in arc order), then penalties, from ``rng``."""
    scheme.validate()
    theta = rng.uniform(15.0, 25.0, n)
    xi = rng.uniform(3.0, 5.0, len(arcs))
    unreachable: frozenset[int] = frozenset()
    if scheme.kind == "uniform_degree":
        indeg = np.zeros(n)
        for _, head in arcs:
            indeg[head] += 1
        penalty = rng.uniform(17.0 + indeg, 23.0 + indeg)
    else:
        dist, unreachable = consumer_distances(n, arcs, scheme.consumer_set)
        penalty = scheme.L0 / scheme.c0 ** np.asarray(dist, float)
        if scheme.kind == "matched_uniform":
            mu = float(penalty.mean())
            penalty = rng.uniform(max(mu - scheme.width, 0.0), mu + scheme.width, n)
    links = dict(zip((tuple(a) for a in arcs), xi.tolist()))
    net = SecurityNetwork.from_links(theta.tolist(), penalty.tolist(), links)
    return SampledNetwork(net, unreachable)


def sample_network(topology: str | Topology, scheme: CostScheme, seed: int,
                   bidirectional: bool = True) -> SampledNetwork:
    """Topology and costs from one PCG64 stream; deterministic in ``seed``."""
    topo = Topology.parse(topology) if isinstance(topology, str) else topology
    rng = _rng(seed)
    n, arcs = build_topology(topo, rng, bidirectional)
    return sample_costs(n, arcs, scheme, rng)


# -- experiments --------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    topology: str
    scheme: CostScheme = field(default_factory=CostScheme)
    runs: int = 1
    seed: int = 0
    delta_max: int = 3
    bidirectional: bool = True
    tolerance: float = 1e-9
    timings: bool = False

    def validate(self) -> Topology:
        if self.runs < 1:
            raise ValidationError("runs must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.delta_max < 1:
            raise ValidationError("delta_max must be at least 1")
        if self.tolerance < 0:
            raise ValidationError("tolerance must be non-negative")
        self.scheme.validate()
        return Topology.parse(self.topology)


@dataclass(frozen=True)
class RunRecord:
    run: int
    seed: int
    topology: str
    network_hash: str
    n: int
    m: int
    agreeable_exists: bool
    shapley_cf_applicable: bool
    delta_star: int | None
    grand_cost: float
    unreachable: int = 0
    ms_mincut: float | None = None
    ms_agreeable: float | None = None


def run_once(config: ExperimentConfig, run: int) -> RunRecord:
    """One sampled network and its measured quantities.

    Existence and ``delta_star`` are evaluated on the reduced network;
    ``delta_star`` is 1 whenever the agreeable family covers everyone and is
    otherwise searched up to ``delta_max`` (``None`` if none works).
    """
    topo = config.validate()
    seed = config.seed + run
    with settings.tolerance(config.tolerance):
        sample = sample_network(topo, config.scheme, seed, config.bidirectional)
        net = sample.network
        t0 = time.perf_counter()
        grand = network_optimal(net).cost
        t1 = time.perf_counter()
        reduced = reduce_network(net).network
        exists = agreeable_family(reduced, check_reduced=False).exists if reduced.n else True
        if exists:
            delta_star: int | None = 1
        else:
            delta_star = smallest_delta(reduced, config.delta_max)
        t2 = time.perf_counter()
        cf = closed_form_applicable(net)
    return RunRecord(run, seed, str(topo), network_hash(net), net.n, net.m, exists, cf,
                     delta_star, grand, len(sample.unreachable),
                     (t1 - t0) * 1e3 if config.timings else None,
                     (t2 - t1) * 1e3 if config.timings else None)


def _run_chunk(args: tuple[ExperimentConfig, list[int]]) -> list[RunRecord]:
    config, runs = args
    return [run_once(config, r) for r in runs]


def bootstrap_interval(flags: Sequence[bool], confidence: float = 0.99,
                       seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for a frequency (scipy, PCG64-seeded)."""
    data = np.asarray(flags, float)
    if data.size == 0:
        return (math.nan, math.nan)
    if np.all(data == data[0]):
        return (float(data[0]), float(data[0]))
    res = stats.bootstrap((data,), np.mean, confidence_level=confidence,
                          n_resamples=BOOTSTRAP_RESAMPLES, method="percentile",
                          random_state=_rng(seed))
    return (float(res.confidence_interval.low), float(res.confidence_interval.high))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[RunRecord]

    def summary(self) -> dict:
        recs = self.records
        exists = [r.agreeable_exists for r in recs]
        cf = [r.shapley_cf_applicable for r in recs]
        deltas: dict[str, int] = {}
        for r in recs:
            key = "none" if r.delta_star is None else str(r.delta_star)
            deltas[key] = deltas.get(key, 0) + 1
        cfg = asdict(self.config)
        cfg["scheme"]["consumer_set"] = list(self.config.scheme.consumer_set)
        return {
            "version": __version__,
            "csv_schema": CSV_SCHEMA_VERSION,
            "config": cfg,
            "runs": len(recs),
            "existence_rate": float(np.mean(exists)),
            "existence_ci99": list(bootstrap_interval(exists, seed=self.config.seed)),
            "shapley_cf_rate": float(np.mean(cf)),
            "shapley_cf_ci99": list(bootstrap_interval(cf, seed=self.config.seed + 1)),
            "delta_star_counts": dict(sorted(deltas.items())),
            "mean_grand_cost": float(np.mean([r.grand_cost for r in recs])),
            "unreachable_nodes": int(sum(r.unreachable for r in recs)),
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([
                r.run, r.seed, r.topology, r.n, r.m, int(r.agreeable_exists),
                int(r.shapley_cf_applicable), "" if r.delta_star is None else r.delta_star,
                repr(r.grand_cost),
                "" if r.ms_mincut is None else f"{r.ms_mincut:.3f}",
                "" if r.ms_agreeable is None else f"{r.ms_agreeable:.3f}",
            ])
        return buf.getvalue()

    def write(self, csv_path: str | Path, summary_path: str | Path | None = None) -> Path:
        """Write the CSV and a summary JSON (default: same stem, ``.json``)."""
        csv_path = Path(csv_path)
        summary_path = Path(summary_path) if summary_path else csv_path.with_suffix(".json")
        for path, text in ((csv_path, self.csv_text()),
                           (summary_path, json.dumps(self.summary(), indent=2) + "\n")):
            try:
                path.write_text(text, encoding="utf-8")
            except OSError as exc:
                raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        return summary_path


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run every sample, in parallel when ``jobs > 1``; records come back in run order."""
    config.validate()
    runs = list(range(config.runs))
    if jobs <= 1 or config.runs < 2:
        records = [run_once(config, r) for r in runs]
    else:
        chunks = [(config, runs[k::jobs]) for k in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = [rec for part in pool.map(_run_chunk, chunks) for rec in part]
    records.sort(key=lambda r: r.run)
    return ExperimentResult(config, records)


def run_manifest(scheme_kind: str, runs_per_network: int, seed: int = 0, delta_max: int = 1,
                 bidirectional: bool = True, jobs: int = 1, **scheme_args) -> list[ExperimentResult]:
    """One experiment per bundled network, each using that network's consumers.

    Network ``k`` uses seeds starting at ``seed + k * runs_per_network`` so
    streams never overlap.
    """
    results = []
    for k, entry in enumerate(load_manifest()):
        scheme = CostScheme(scheme_kind, consumer_set=tuple(entry["consumers"]), **scheme_args)
        config = ExperimentConfig(f"manifest({k})", scheme, runs_per_network,
                                  seed + k * runs_per_network, delta_max, bidirectional)
        results.append(run_experiment(config, jobs))
    return results
