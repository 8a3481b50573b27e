"""Walk through the bundled example networks and print what each one illustrates.

Run with ``python3 scripts/worked_examples.py``.
"""

from importlib import resources

import numpy as np

from coopsec import load_network
from coopsec.agreeable import agreeable_allocation, agreeable_family, delta_agreeable
from coopsec.game import classify_shapley_bilateral, shapley_exact
from coopsec.information import grand_coalition_deviation_check, public_independent_equilibrium
from coopsec.strategies import independent_secure_set, is_nash, network_optimal


def load(name):
    return load_network(resources.files("coopsec.data").joinpath(f"{name}.json").read_text())


def labels(net, members):
    return "{" + ",".join(net.label(i) for i in sorted(members)) + "}"


def fmt(values):
    return "(" + ", ".join(f"{v:g}" for v in np.round(values, 4)) + ")"


def section(title):
    print(f"\n== {title}")


section("optimum_not_nash: the cheapest outcome is not an equilibrium")
net = load("optimum_not_nash")
ind, opt = independent_secure_set(net), network_optimal(net)
print(f"independent play secures {labels(net, ind.secured)} at cost {ind.cost:g}")
print(f"the optimum secures {labels(net, opt.secured)} at cost {opt.cost:g}; "
      f"Nash: {is_nash(net, opt.profile)}")
print(f"Shapley split of the optimum: {fmt(shapley_exact(net).shares)}")

section("strict_inclusion: agreeable sharing differs from Shapley")
net = load("strict_inclusion")
print(f"waves: {[labels(net, w) for w in agreeable_family(net).sets]}")
print(f"agreeable {fmt(agreeable_allocation(net).shares)} vs Shapley {fmt(shapley_exact(net).shares)}")
print(f"bilateral verdict: {classify_shapley_bilateral(net).verdict.value}")

for name in ("delta_example", "delta_example_variant"):
    section(f"{name}: groups of two")
    net = load(name)
    fam = agreeable_family(net)
    print(f"singleton waves {[labels(net, w) for w in fam.sets]} cover everyone: {fam.exists}")
    run = delta_agreeable(net, 2)
    print(f"delta=2 uses {run.permutation_count} orders, allocation {fmt(run.allocation.shares)}")

section("unstable_hub: observability can break the grand coalition")
net = load("unstable_hub")
print(f"public singleton equilibrium secures {labels(net, public_independent_equilibrium(net).secured)}")
rep = grand_coalition_deviation_check(net)
print(f"grand cost {rep.grand_cost:g}, most the players accept {rep.best_total:g}; stable: {rep.stable}")
print("blocking: " + ", ".join(f"{labels(net, s)} pays {rep.bounds[s]:g} alone" for s in rep.blocking))
print(f"without observability stable: {grand_coalition_deviation_check(net, 'private').stable}")
