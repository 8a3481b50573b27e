"""Regenerate the bundled corpus of 50 synthetic alliance networks.

Sizes are chosen so the corpus averages 6.8 nodes with median 6, and 28
of the 50 networks are trees. Edges are undirected; experiments decide
whether each becomes one arc or two.

    python3 scripts/make_manifest.py > src/coopsec/data/alliance_manifest.json
"""

import json
import sys

import numpy as np

SIZES = [5] * 16 + [6] * 13 + [7] * 10 + [8] * 6 + [9] * 2 + [10, 11, 25]
STARS = 10
TREES = 18
CLIQUES = 6
ER_P = 0.4


def connected(n, edges):
    seen, stack = {0}, [0]
    nbrs = {i: set() for i in range(n)}
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    while stack:
        for w in nbrs[stack.pop()] - seen:
            seen.add(w)
            stack.append(w)
    return len(seen) == n


def main():
    rng = np.random.Generator(np.random.PCG64(20240101))
    sizes = list(rng.permutation(SIZES))
    kinds = ["star"] * STARS + ["tree"] * TREES + ["clique"] * CLIQUES
    kinds += ["erdos_renyi"] * (len(SIZES) - len(kinds))
    out = []
    for k, (kind, n) in enumerate(zip(kinds, sizes)):
        n = int(n)
        if kind == "clique":
            n = min(n, 7)
        if kind == "star":
            edges = [(leaf, 0) for leaf in range(1, n)]
        elif kind == "tree":
            edges = [(v, int(rng.integers(0, v))) for v in range(1, n)]
        elif kind == "clique":
            edges = [(a, b) for a in range(n) for b in range(a + 1, n)]
        else:
            while True:
                pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
                keep = rng.random(len(pairs)) < ER_P
                edges = [p for p, kp in zip(pairs, keep) if kp]
                if connected(n, edges) and len(edges) > n - 1:
                    break
        out.append({"name": f"alliance-{k:02d}", "kind": kind, "n": n,
                    "consumers": [0], "edges": [list(e) for e in edges]})
    json.dump({"description": "synthetic alliance networks", "networks": out}, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
