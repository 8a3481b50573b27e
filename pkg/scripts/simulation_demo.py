"""Compare agreeable existence across topologies and penalty schemes.

Run with ``python3 scripts/simulation_demo.py [--runs N] [--jobs J]``.
Smaller ``--runs`` gives a quick look; the test suite uses 1000.
"""

import argparse

import numpy as np

from coopsec.simulation import CostScheme, ExperimentConfig, run_experiment, run_manifest


def describe(label, summary):
    low, high = summary["existence_ci99"]
    print(f"{label:<28} existence {summary['existence_rate']:.3f}  99% CI [{low:.3f}, {high:.3f}]"
          f"  delta* {summary['delta_star_counts']}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=200)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    print("uniform_degree penalties")
    for topo, seed in (("star(7)", 6006), ("clique(6)", 7007), ("random_tree(8)", 11),
                       ("erdos_renyi(8,0.4)", 12)):
        result = run_experiment(ExperimentConfig(topo, CostScheme(), args.runs, seed), args.jobs)
        describe(topo, result.summary())

    per_network = max(1, args.runs // 10)
    print(f"\nmanifest networks, {per_network} runs each, consumer at node 0")
    for kind in ("distance_decay", "matched_uniform"):
        results = run_manifest(kind, per_network, seed=500, jobs=args.jobs)
        rate = np.mean([r.summary()["existence_rate"] for r in results])
        print(f"{kind:<28} mean existence {rate:.3f}")


if __name__ == "__main__":
    main()
