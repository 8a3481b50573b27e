"""Command-line front end: ``coopsec <subcommand> NETWORK.json [flags]``.

Results go to stdout (or ``--out``) as JSON that always carries the input
hash and library version. Exit codes: 0 success, 2 invalid input,
3 size guard exceeded, 4 the requested allocation does not exist.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from typing import Any, Iterable, Sequence

from . import __version__, settings
from .agreeable import agreeable_family, agreeable_shares, delta_agreeable, require_reduced
from .errors import GuardExceededError, NotReducedError, ValidationError
from .game import (
    closed_form_applicable,
    core_violation,
    extreme_core_allocation,
    shapley_closed_form,
    shapley_exact,
    shapley_monte_carlo,
)
from .homogeneous import core_numbers, has_k_core, predict_agreeable_existence
from .information import (
    audit_equilibrium,
    coalition_equilibrium,
    grand_coalition_deviation_check,
    partial_agreeable,
    partition_cost,
    public_agreeable_shares,
    public_family,
)
from .network import (
    Allocation,
    PartitionStructure,
    SecurityNetwork,
    load_network,
    network_hash,
    network_to_dict,
    reduce_network,
)
from .simulation import CostScheme, ExperimentConfig, run_experiment
from .strategies import (
    brute_force_coalition_cost,
    coalition_cost,
    independent_secure_set,
    is_nash,
    network_optimal,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_GUARD = 3
EXIT_MISSING = 4


class Nonexistence(Exception):
    """The requested allocation does not exist; carries the JSON payload."""

    def __init__(self, payload: dict) -> None:
        super().__init__(payload.get("reason", "allocation does not exist"))
        self.payload = payload


# -- id translation -------------------------------------------------------------

def _ident(net: SecurityNetwork, i: int):
    label = net.label(i)
    return int(label) if label.lstrip("-").isdigit() else label


def _ids(net: SecurityNetwork, members: Iterable[int]) -> list:
    return [_ident(net, i) for i in sorted(members)]


def _set_text(net: SecurityNetwork, members: Iterable[int]) -> str:
    return "{" + ",".join(str(v) for v in _ids(net, members)) + "}"


def _index(net: SecurityNetwork, token: str, flag: str) -> int:
    for i in range(net.n):
        if net.label(i) == token.strip():
            return i
    raise ValidationError(f"{flag}: unknown player {token.strip()!r}")


def _members(net: SecurityNetwork, text: str | None, flag: str) -> list[int]:
    if text is None or not text.strip():
        return []
    return [_index(net, tok, flag) for tok in text.split(",") if tok.strip()]


def _partition(net: SecurityNetwork, text: str | None, flag: str = "--partition") -> PartitionStructure:
    """``"1,2|3"`` style; players not mentioned become singletons."""
    if text is None:
        return PartitionStructure.singletons(net.n)
    blocks = [frozenset(_members(net, part, flag)) for part in text.split("|") if part.strip()]
    seen = frozenset().union(*blocks) if blocks else frozenset()
    blocks += [frozenset({i}) for i in range(net.n) if i not in seen]
    try:
        rho = PartitionStructure(tuple(blocks))
        rho.check_covers(net.n)
    except ValidationError as exc:
        raise ValidationError(f"{flag}: {exc}") from None
    return rho


def _shares(net: SecurityNetwork, alloc: Allocation) -> dict:
    return {"players": _ids(net, range(net.n)), "shares": alloc.tolist(), "total": alloc.total}


def _numbers(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValidationError(f"{flag}: expected comma-separated numbers") from None


# -- subcommands ------------------------------------------------------------------

def cmd_solve(net: SecurityNetwork, args) -> dict:
    ind = independent_secure_set(net)
    opt = network_optimal(net)
    return {
        "independent": {"secured": _ids(net, ind.secured), "cost": ind.cost},
        "optimal": {"secured": _ids(net, opt.secured), "cost": opt.cost},
        "U": opt.cost,
        "secured": _ids(net, opt.secured),
        "cost": opt.cost,
        "optimal_is_nash": is_nash(net, opt.profile) if args.check_nash else None,
    }


def cmd_coalition_cost(net: SecurityNetwork, args) -> dict:
    members = _members(net, args.coalition, "--coalition")
    solver = brute_force_coalition_cost if args.brute_force else coalition_cost
    res = solver(net, members)
    return {"coalition": _ids(net, members), "cost": res.cost, "secured": _ids(net, res.secured)}


def cmd_shapley(net: SecurityNetwork, args) -> dict:
    if args.method == "exact":
        return {"method": "exact", **_shares(net, shapley_exact(net))}
    if args.method == "closed":
        if not closed_form_applicable(net):
            raise Nonexistence({"method": "closed", "exists": False,
                                "reason": "closed form needs penalty > theta + in-link costs for every player"})
        return {"method": "closed", **_shares(net, shapley_closed_form(net))}
    est = shapley_monte_carlo(net, args.samples, args.seed)
    return {"method": "mc", "samples": est.samples, "seed": args.seed,
            "stderr": est.stderr.tolist(), **_shares(net, est.allocation)}


def cmd_core_check(net: SecurityNetwork, args) -> dict:
    values = _numbers(args.allocation, "--allocation")
    if len(values) != net.n:
        raise ValidationError(f"--allocation: expected {net.n} values, got {len(values)}")
    bad = core_violation(net, values)
    return {"in_core": bad is None, "violated_coalition": None if bad is None else _ids(net, bad)}


def cmd_extreme_core(net: SecurityNetwork, args) -> dict:
    order = _members(net, args.order, "--order") if args.order else list(range(net.n))
    if sorted(order) != list(range(net.n)):
        raise ValidationError("--order: must list every player exactly once")
    return {"order": [_ident(net, i) for i in order],
            **_shares(net, extreme_core_allocation(net, order))}


def _maybe_reduce(net: SecurityNetwork, args) -> tuple[SecurityNetwork, list[int] | None]:
    if not args.reduce:
        require_reduced(net)
        return net, None
    red = reduce_network(net)
    return red.network, list(red.kept)


def _lift(net: SecurityNetwork, sub_alloc: Allocation, kept: list[int] | None) -> Allocation:
    if kept is None:
        return sub_alloc
    shares = list(net.penalty)
    for k, orig in enumerate(kept):
        shares[orig] = sub_alloc.shares[k]
    return Allocation(shares)


def _sub_ids(net: SecurityNetwork, kept: list[int] | None, members: Iterable[int]) -> list:
    return _ids(net, members if kept is None else (kept[i] for i in members))


def cmd_agreeable(net: SecurityNetwork, args) -> dict:
    sub, kept = _maybe_reduce(net, args)
    family = agreeable_family(sub, check_reduced=False)
    waves = [_sub_ids(net, kept, w) for w in family.sets]
    if not family.exists:
        covered = _sub_ids(net, kept, family.covered)
        raise Nonexistence({"exists": False, "family": waves,
                            "reason": "family stalled at {" + ",".join(map(str, covered)) + "}"})
    return {"exists": True, "family": waves,
            **_shares(net, _lift(net, agreeable_shares(sub, family), kept))}


def cmd_delta_agreeable(net: SecurityNetwork, args) -> dict:
    sub, kept = _maybe_reduce(net, args)
    run = delta_agreeable(sub, args.delta, args.cap, check_reduced=False)
    stages = [{"base": _sub_ids(net, kept, st.base),
               "groups": [_sub_ids(net, kept, g) for g in st.groups.groups],
               "group_size": st.groups.size} for st in run.stages]
    if not run.exists:
        covered = frozenset()
        if run.stages:
            covered = run.stages[-1].base.union(*run.stages[-1].groups.groups)
        stalled = ",".join(map(str, _sub_ids(net, kept, covered)))
        raise Nonexistence({"exists": False, "delta": args.delta, "stages": stages,
                            "reason": f"no group of at most {args.delta} players can join "
                                      f"{{{stalled}}}"})
    out = {"exists": True, "delta": args.delta, "stages": stages,
           "permutation_count": run.permutation_count,
           **_shares(net, _lift(net, run.allocation, kept))}
    if args.list_permutations:
        out["permutations"] = [_sub_ids_ordered(net, kept, p) for p in run.permutations(args.cap)]
    return out


def _sub_ids_ordered(net: SecurityNetwork, kept: list[int] | None, order: Sequence[int]) -> list:
    return [_ident(net, i if kept is None else kept[i]) for i in order]


def _with_public(net: SecurityNetwork, args) -> SecurityNetwork:
    if args.public is not None:
        return net.with_public(_members(net, args.public, "--public"))
    return net


def cmd_public_eq(net: SecurityNetwork, args) -> dict:
    net = _with_public(net, args)
    rho = _partition(net, args.partition)
    eq = coalition_equilibrium(net, rho, args.information)
    return {"information": args.information,
            "partition": [_ids(net, b) for b in rho.blocks],
            "secured": _ids(net, eq.secured),
            "observed": _ids(net, eq.observed),
            "rounds": eq.rounds,
            "audit_passed": audit_equilibrium(net, rho, eq, args.information)}


def cmd_partition_cost(net: SecurityNetwork, args) -> dict:
    net = _with_public(net, args)
    members = _members(net, args.coalition, "--coalition")
    rho = _partition(net, args.partition)
    if members and frozenset(members) not in rho.blocks:
        raise ValidationError("--coalition: must be a block of --partition")
    cost = partition_cost(net, members, rho, args.information)
    return {"information": args.information, "coalition": _ids(net, members),
            "partition": [_ids(net, b) for b in rho.blocks], "cost": cost}


def cmd_stability_check(net: SecurityNetwork, args) -> dict:
    net = _with_public(net, args)
    rep = grand_coalition_deviation_check(net, args.information, args.residual)
    return {"information": args.information, "residual": args.residual,
            "stable": rep.stable, "grand_cost": rep.grand_cost, "best_total": rep.best_total,
            "blocking": [{"coalition": _ids(net, s), "bound": rep.bounds[s]} for s in rep.blocking]}


def cmd_partial_agreeable(net: SecurityNetwork, args) -> dict:
    net = _with_public(net, args)
    require_reduced(net)
    if args.information == "public":
        family = public_family(net, check_reduced=False)
        waves = [_ids(net, w) for w in family.sets]
        if not family.exists:
            covered = frozenset().union(*family.sets) if family.sets else frozenset()
            raise Nonexistence({"exists": False, "information": "public", "family": waves,
                                "reason": "family stalled at " + _set_text(net, covered)})
        return {"exists": True, "information": "public", "family": waves,
                **_shares(net, public_agreeable_shares(net, family))}
    res = partial_agreeable(net, check_reduced=False)
    steps = [{"kind": kind, "members": _ids(net, m)} for kind, m in res.steps]
    if not res.exists:
        covered = frozenset().union(*(m for _, m in res.steps)) if res.steps else frozenset()
        raise Nonexistence({"exists": False, "information": "partial", "steps": steps,
                            "reason": "family stalled at " + _set_text(net, covered)})
    return {"exists": True, "information": "partial", "public": _ids(net, net.public),
            "steps": steps, **_shares(net, res.allocation)}


def cmd_kcore(net: SecurityNetwork, args) -> dict:
    out: dict[str, Any] = {"players": _ids(net, range(net.n)), "core_number": core_numbers(net)}
    if args.k is not None:
        if args.k < 1:
            raise ValidationError("--k: must be at least 1")
        core = has_k_core(net, args.k)
        out["k"] = args.k
        out["core"] = None if core is None else _ids(net, core)
    return out


def cmd_predict_homogeneous(net: SecurityNetwork, args) -> dict:
    try:
        pred = predict_agreeable_existence(net, exact=not args.heuristic)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return {"verdict": pred.verdict.value, "threshold": pred.threshold,
            "witness": None if pred.witness is None else _ids(net, pred.witness)}


def cmd_reduce(net: SecurityNetwork, args) -> dict:
    red = reduce_network(net)
    return {"removed": _ids(net, red.removed), "kept": _ids(net, red.kept), "rounds": red.rounds,
            "network": network_to_dict(red.network)}


def cmd_simulate(args) -> tuple[dict, str]:
    consumers = tuple(int(t) for t in args.consumers.split(",") if t.strip()) if args.consumers else ()
    scheme = CostScheme(args.scheme, args.L0, args.c0, consumers, args.width)
    config = ExperimentConfig(args.topology, scheme, args.runs, args.seed, args.delta_max,
                              not args.unidirectional, args.tolerance, args.timings)
    config.validate()
    digest = hashlib.sha256(json.dumps(
        [args.topology, args.scheme, args.L0, args.c0, list(consumers), args.width, args.runs,
         args.seed, args.delta_max, not args.unidirectional, args.tolerance]).encode()).hexdigest()
    result = run_experiment(config, args.jobs)
    summary = result.summary()
    if args.csv:
        result.write(args.csv)
        summary["csv"] = args.csv
    return summary, digest


NETWORK_COMMANDS = {
    "solve": cmd_solve,
    "coalition-cost": cmd_coalition_cost,
    "shapley": cmd_shapley,
    "core-check": cmd_core_check,
    "extreme-core": cmd_extreme_core,
    "agreeable": cmd_agreeable,
    "delta-agreeable": cmd_delta_agreeable,
    "public-eq": cmd_public_eq,
    "partition-cost": cmd_partition_cost,
    "stability-check": cmd_stability_check,
    "partial-agreeable": cmd_partial_agreeable,
    "kcore": cmd_kcore,
    "predict-homogeneous": cmd_predict_homogeneous,
    "reduce": cmd_reduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write JSON here instead of stdout")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for simulations")
    common.add_argument("--tolerance", type=float, default=settings.TOL,
                        help="numerical tolerance for comparisons")

    def net_cmd(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("network", help="network JSON file")
        return p

    def info_flags(p: argparse.ArgumentParser, default: str = "public") -> None:
        p.add_argument("--information", choices=("private", "public", "partial"), default=default)
        p.add_argument("--public", help="comma-separated observable players (overrides the file)")

    parser = argparse.ArgumentParser(prog="coopsec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"coopsec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = net_cmd("solve", "independent and network-optimal strategies")
    p.add_argument("--no-nash", dest="check_nash", action="store_false",
                   help="skip the Nash check of the optimal profile")
    p = net_cmd("coalition-cost", "worst-case cost of a coalition")
    p.add_argument("--coalition", required=True, help="comma-separated players")
    p.add_argument("--brute-force", action="store_true", help="enumerate instead of min cut")
    p = net_cmd("shapley", "Shapley value")
    p.add_argument("--method", choices=("exact", "closed", "mc"), default="exact")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p = net_cmd("core-check", "test whether an allocation lies in the core")
    p.add_argument("--allocation", required=True, help="comma-separated shares in node order")
    p = net_cmd("extreme-core", "marginal-cost allocation along an order")
    p.add_argument("--order", help="comma-separated players (default: node order)")
    p = net_cmd("agreeable", "agreeable allocation")
    p.add_argument("--reduce", action="store_true", help="reduce the network first")
    p = net_cmd("delta-agreeable", "delta-agreeable allocation")
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--cap", type=int, default=10**6, help="maximum number of orders")
    p.add_argument("--list-permutations", action="store_true")
    p.add_argument("--reduce", action="store_true", help="reduce the network first")
    p = net_cmd("public-eq", "equilibrium of a coalition structure")
    p.add_argument("--partition", help='blocks like "1,2|3"; unlisted players stay alone')
    info_flags(p)
    p = net_cmd("partition-cost", "cost of one block within a coalition structure")
    p.add_argument("--coalition", required=True)
    p.add_argument("--partition", help='blocks like "1,2|3"')
    info_flags(p)
    p = net_cmd("stability-check", "can the grand coalition deter every deviation")
    p.add_argument("--residual", choices=("together", "singletons"), default="together")
    info_flags(p)
    p = net_cmd("partial-agreeable", "agreeable allocation with observable security")
    info_flags(p, default="partial")
    p = net_cmd("kcore", "in-degree core numbers")
    p.add_argument("--k", type=int)
    p = net_cmd("predict-homogeneous", "core-based existence prediction")
    p.add_argument("--heuristic", action="store_true", help="skip the exact subset search")
    net_cmd("reduce", "drop players unsecured in the social optimum")

    p = sub.add_parser("simulate", parents=[common], help="batch experiment on synthetic networks")
    p.add_argument("--topology", required=True,
                   help="star(n), clique(n), random_tree(n), erdos_renyi(n,p), from_file(path), manifest(k)")
    p.add_argument("--scheme", choices=("uniform_degree", "distance_decay", "matched_uniform"),
                   default="uniform_degree")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta-max", type=int, default=3)
    p.add_argument("--unidirectional", action="store_true", help="one arc per undirected edge")
    p.add_argument("--consumers", help="comma-separated consumer-facing node indices")
    p.add_argument("--L0", type=float, default=409.6)
    p.add_argument("--c0", type=float, default=2.0)
    p.add_argument("--width", type=float, default=3.0, help="half-width of the matched benchmark")
    p.add_argument("--timings", action="store_true", help="fill the timing columns")
    p.add_argument("--csv", help="per-run CSV path; the summary JSON is written next to it")
    return parser


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    code = EXIT_OK
    try:
        if args.jobs < 1:
            raise ValidationError("--jobs: must be at least 1")
        if args.tolerance < 0:
            raise ValidationError("--tolerance: must be non-negative")
        with settings.tolerance(args.tolerance):
            if args.command == "simulate":
                body, digest = cmd_simulate(args)
            else:
                net = load_network(args.network)
                digest = network_hash(net)
                try:
                    body = NETWORK_COMMANDS[args.command](net, args)
                except Nonexistence as missing:
                    body = missing.payload
                    code = EXIT_MISSING
                    print(f"coopsec: {missing}", file=sys.stderr)
    except (ValidationError, NotReducedError) as exc:
        print(f"coopsec: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except GuardExceededError as exc:
        print(f"coopsec: size guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except OSError as exc:
        print(f"coopsec: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit({"command": args.command, "input_hash": digest, "version": __version__, **body}, args.out)
    return code


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
