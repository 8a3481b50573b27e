import json

import numpy as np
import pytest

from conftest import example_path
from coopsec import ValidationError
from coopsec.simulation import (
    CSV_COLUMNS,
    CostScheme,
    ExperimentConfig,
    Topology,
    bootstrap_interval,
    build_topology,
    consumer_distances,
    load_manifest,
    run_experiment,
    run_once,
    sample_network,
)

DECAY = CostScheme("distance_decay", consumer_set=(0,))


class TestTopology:
    @pytest.mark.parametrize("text, kind, n", [
        ("star(7)", "star", 7), ("clique(4)", "clique", 4), ("random_tree(9)", "random_tree", 9),
        ("erdos_renyi(10, 0.3)", "erdos_renyi", 10), ("manifest(3)", "manifest", 0),
    ])
    def test_parse(self, text, kind, n):
        topo = Topology.parse(text)
        assert (topo.kind, topo.n) == (kind, n)
        assert Topology.parse(str(topo)) == topo

    @pytest.mark.parametrize("text", ["star(1)", "ring(5)", "clique(x)", "erdos_renyi(5,2)",
                                      "star", "clique(0)"])
    def test_rejects(self, text):
        with pytest.raises(ValidationError):
            Topology.parse(text)

    def test_shapes(self):
        rng = np.random.Generator(np.random.PCG64(0))
        assert build_topology(Topology.parse("star(5)"), rng) == \
            (5, [(1, 0), (0, 1), (2, 0), (0, 2), (3, 0), (0, 3), (4, 0), (0, 4)])
        n, arcs = build_topology(Topology.parse("star(5)"), rng, bidirectional=False)
        assert arcs == [(1, 0), (2, 0), (3, 0), (4, 0)]
        n, arcs = build_topology(Topology.parse("clique(4)"), rng)
        assert len(arcs) == 12
        n, arcs = build_topology(Topology.parse("random_tree(8)"), rng, bidirectional=False)
        assert len(arcs) == 7 and all(head < tail for tail, head in arcs)

    def test_from_file_keeps_arcs(self):
        topo = Topology.parse(f"from_file({example_path('optimum_not_nash')})")
        n, arcs = build_topology(topo, None)
        assert (n, sorted(arcs)) == (2, [(0, 1), (1, 0)])

    def test_manifest(self):
        entries = load_manifest()
        assert len(entries) == 50
        assert all(e["consumers"] == [0] for e in entries)
        with pytest.raises(ValidationError):
            build_topology(Topology.parse("manifest(50)"), None)


class TestCosts:
    def test_clique_decay(self):
        net = sample_network("clique(4)", DECAY, seed=1).network
        assert net.penalty == (409.6, 204.8, 204.8, 204.8)

    def test_star_uniform_degree(self):
        for seed in range(20):
            net = sample_network("star(5)", CostScheme(), seed).network
            assert 21.0 <= net.penalty[0] <= 27.0
            assert all(18.0 <= p <= 24.0 for p in net.penalty[1:])
            assert all(15.0 <= t <= 25.0 for t in net.theta)
            assert all(3.0 <= x <= 5.0 for x in net.xi)

    def test_matched_uniform_centred_on_decay_mean(self):
        scheme = CostScheme("matched_uniform", consumer_set=(0,), width=3.0)
        mu = np.mean([409.6, 204.8, 204.8, 204.8])
        for seed in range(10):
            pen = sample_network("clique(4)", scheme, seed).network.penalty
            assert all(mu - 3 <= p <= mu + 3 for p in pen)

    def test_unreachable_nodes(self):
        # hub 0 feeds leaves 1 and 2; leaf 2 has no path to the consumer at leaf 1
        dist, unreachable = consumer_distances(3, [(0, 1), (0, 2)], [1])
        assert unreachable == {2}
        assert dist == [1, 0, 2]
        sample = sample_network("star(4)", CostScheme("distance_decay", consumer_set=(1,)), 0,
                                bidirectional=False)
        # arcs point leaves at the hub, so only the consumer itself reaches it
        assert sample.unreachable == {0, 2, 3}

    def test_deterministic(self):
        a = sample_network("erdos_renyi(12,0.3)", CostScheme(), 99).network
        b = sample_network("erdos_renyi(12,0.3)", CostScheme(), 99).network
        assert a == b

    @pytest.mark.parametrize("scheme", [CostScheme("bogus"), CostScheme("distance_decay"),
                                        CostScheme("distance_decay", c0=1.0, consumer_set=(0,)),
                                        CostScheme("distance_decay", L0=0.0, consumer_set=(0,))])
    def test_scheme_validation(self, scheme):
        with pytest.raises(ValidationError):
            scheme.validate()

    def test_bad_consumer(self):
        with pytest.raises(ValidationError):
            sample_network("star(3)", CostScheme("distance_decay", consumer_set=(5,)), 0)


class TestExperiment:
    def test_config_validation(self):
        for cfg in (ExperimentConfig("star(3)", runs=0), ExperimentConfig("star(3)", seed=-1),
                    ExperimentConfig("star(3)", delta_max=0), ExperimentConfig("star(3)", tolerance=-1)):
            with pytest.raises(ValidationError):
                cfg.validate()

    def test_record_fields(self):
        rec = run_once(ExperimentConfig("star(4)", seed=5), 2)
        assert rec.seed == 7 and rec.n == 4 and rec.m == 6
        assert rec.ms_mincut is None
        if rec.agreeable_exists:
            assert rec.delta_star == 1

    def test_csv_and_summary(self, tmp_path):
        result = run_experiment(ExperimentConfig("random_tree(6)", runs=12, seed=3))
        lines = result.csv_text().splitlines()
        assert lines[0].split(",") == list(CSV_COLUMNS)
        assert len(lines) == 13
        summary_path = result.write(tmp_path / "out.csv")
        summary = json.loads(summary_path.read_text())
        assert summary["runs"] == 12
        low, high = summary["existence_ci99"]
        assert low <= summary["existence_rate"] <= high

    def test_write_error_names_path(self, tmp_path):
        result = run_experiment(ExperimentConfig("star(3)", runs=1))
        target = tmp_path / "missing" / "out.csv"
        with pytest.raises(OSError, match="missing"):
            result.write(target)

    def test_timings_column(self):
        result = run_experiment(ExperimentConfig("star(3)", runs=2, timings=True))
        assert all(r.ms_mincut is not None for r in result.records)

    def test_parallel_matches_serial(self):
        cfg = ExperimentConfig("erdos_renyi(7,0.4)", runs=9, seed=11)
        assert run_experiment(cfg, jobs=3).csv_text() == run_experiment(cfg).csv_text()


def test_bootstrap_interval():
    assert bootstrap_interval([True] * 10) == (1.0, 1.0)
    low, high = bootstrap_interval([True, False] * 50, seed=4)
    assert low < 0.5 < high
    assert bootstrap_interval([True, False] * 50, seed=4) == (low, high)
    assert all(np.isnan(bootstrap_interval([])))
