"""Cooperative cost sharing for security investments on risk networks.

A network of firms passes risk along directed links. Each firm can secure
itself at a cost, and must also pay to secure links from partners it
believes are unsecured. This package computes independent and socially
optimal security decisions, the induced coalitional cost game and several
ways of sharing the optimal cost.
"""

__version__ = "0.1.0"

from . import settings

from .errors import GuardExceededError, NotReducedError, ValidationError
from .network import (
    Allocation,
    PartitionStructure,
    SecurityNetwork,
    SecurityProfile,
    dump_network,
    load_network,
    network_hash,
    reduce_network,
)
from .strategies import (
    brute_force_coalition_cost,
    coalition_cost,
    cost_table,
    independent_secure_set,
    is_nash,
    network_optimal,
)
from .game import (
    classify_shapley_bilateral,
    extreme_core_allocation,
    is_core_allocation,
    is_submodular,
    shapley_closed_form,
    shapley_exact,
    shapley_monte_carlo,
)
from .agreeable import agreeable_allocation, agreeable_family, delta_agreeable
from .information import (
    grand_coalition_deviation_check,
    partial_agreeable_allocation,
    partition_cost,
    public_agreeable_allocation,
    public_coalition_equilibrium,
    public_independent_equilibrium,
)
from .homogeneous import find_kl_core, has_k_core, predict_agreeable_existence

__all__ = sorted(name for name, value in globals().items()
                 if not name.startswith("_") and not isinstance(value, type(settings)))
