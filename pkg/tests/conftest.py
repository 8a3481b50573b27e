"""Shared fixtures: bundled example networks, seeded random instances, acceptance reporting."""

from __future__ import annotations

import re
from collections import defaultdict
from importlib import resources

import numpy as np
import pytest
from hypothesis import strategies as st

from coopsec import SecurityNetwork, load_network, network_optimal, reduce_network


def example(name: str) -> SecurityNetwork:
    text = resources.files("coopsec.data").joinpath(f"{name}.json").read_text("utf-8")
    return load_network(text)


def example_path(name: str) -> str:
    return str(resources.files("coopsec.data").joinpath(f"{name}.json"))


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


TOPOLOGIES = ("erdos_renyi", "tree", "star", "clique", "cycle")


def random_arcs(rng: np.random.Generator, n: int, kind: str) -> list[tuple[int, int]]:
    if kind == "erdos_renyi":
        p = rng.uniform(0.15, 0.6)
        return [(a, b) for a in range(n) for b in range(n) if a != b and rng.random() < p]
    if kind == "tree":
        edges = [(v, int(rng.integers(0, v))) for v in range(1, n)]
    elif kind == "star":
        edges = [(v, 0) for v in range(1, n)]
    elif kind == "clique":
        edges = [(a, b) for a in range(n) for b in range(a + 1, n)]
    else:
        return [(v, (v + 1) % n) for v in range(n)] if n > 1 else []
    arcs = []
    for a, b in edges:
        if rng.random() < 0.8:
            arcs.append((a, b))
        if rng.random() < 0.8:
            arcs.append((b, a))
    return arcs


def random_network(rng: np.random.Generator, n_min: int = 1, n_max: int = 8,
                   kind: str | None = None, half_penalty: bool = False,
                   theta=(1, 12), xi=(1, 6), penalty=(5, 30)) -> SecurityNetwork:
    """Integer-cost instance of a random topology.

    ``half_penalty`` adds 0.5 to every penalty, which rules out exact
    break-even ties against the integer securing costs.
    """
    n = int(rng.integers(n_min, n_max + 1))
    kind = kind or TOPOLOGIES[int(rng.integers(0, len(TOPOLOGIES)))]
    arcs = random_arcs(rng, n, kind)
    th = rng.integers(theta[0], theta[1] + 1, n).astype(float)
    pen = rng.integers(penalty[0], penalty[1] + 1, n).astype(float) + (0.5 if half_penalty else 0.0)
    links = {arc: float(rng.integers(xi[0], xi[1] + 1)) for arc in arcs}
    return SecurityNetwork.from_links(th.tolist(), pen.tolist(), links)


def random_reduced(rng: np.random.Generator, n_min: int = 2, n_max: int = 8, **kw) -> SecurityNetwork:
    """Random instance already reduced (the optimum secures everyone), with at least ``n_min`` players."""
    while True:
        net = reduce_network(random_network(rng, n_min, n_max, **kw)).network
        if net.n >= n_min:
            assert len(network_optimal(net).secured) == net.n
            return net


def hub_network(rng: np.random.Generator, n_min: int = 3, n_max: int = 6) -> SecurityNetwork:
    """Instances with cheap-to-lose hubs whose links are costly, the shape behind unstable coalitions."""
    n = int(rng.integers(n_min, n_max + 1))
    theta = rng.integers(5, 16, n).astype(float)
    low = rng.random(n) < 0.35
    pen = np.where(low, rng.integers(0, 4, n), rng.integers(50, 121, n)).astype(float)
    links = {(a, b): float(rng.integers(5, 26)) for a in range(n) for b in range(n)
             if a != b and rng.random() < (0.6 if low[a] else 0.2)}
    return SecurityNetwork.from_links(theta.tolist(), pen.tolist(), links)


@st.composite
def networks(draw, max_n: int = 6, min_n: int = 1, half_penalty: bool = False):
    """Hypothesis strategy for small integer-cost networks."""
    n = draw(st.integers(min_n, max_n))
    theta = draw(st.lists(st.integers(1, 12), min_size=n, max_size=n))
    pen = draw(st.lists(st.integers(0, 30), min_size=n, max_size=n))
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    links = {arc: float(draw(st.integers(1, 6))) for arc in chosen}
    shift = 0.5 if half_penalty else 0.0
    return SecurityNetwork.from_links([float(t) for t in theta], [p + shift for p in pen], links)


# -- acceptance reporting ---------------------------------------------------------

ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)
CRITERIA = {
    1: "worked-example regressions",
    2: "oracle equivalence",
    3: "structural theorem suites",
    4: "information-model consistency",
    5: "homogeneous predictor soundness",
    6: "simulation properties",
    7: "performance sanity",
}


_BUDGET = re.compile(r"\b(within|under) [\d.]+ (s|min)\b")


@pytest.fixture
def acceptance():
    """``acceptance(criterion, item, ok, detail)`` records one checked item."""

    def record(criterion: int, item: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE[criterion].append((item, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(CRITERIA):
        items = ACCEPTANCE.get(k)
        if not items:
            tr.write_line(f"criterion {k} ({CRITERIA[k]}): NOT RUN")
            continue
        ok = all(i[1] for i in items)
        failed = [f"{name} [{detail}]" if detail else name for name, good, detail in items if not good]
        line = f"criterion {k} ({CRITERIA[k]}): {'PASS' if ok else 'FAIL'}"
        timing = [detail for name, _, detail in items if _BUDGET.search(name) and detail]
        if timing:
            line += f" ({timing[0]})"
        if failed:
            line += " -- failed: " + "; ".join(failed)
        tr.write_line(line)
