"""Command-line interface.

Exit codes: 0 success, 1 infeasible or invalid input, 2 usage, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from .bench import ALGOS, InfeasibleOutput, bench, corpus_from_dir, corpus_from_family, run_algo
from .bounds import lb_edge, lb_radial, tree_tsp_cost
from .decomposition import check_decomposition, decompose, decomposition_to_dict
from .generators import FAMILIES, generate
from .model import (
    BudgetExceeded,
    instance_to_dict,
    normalize,
    read_instance,
    read_solution,
    verify,
    write_instance,
    write_solution,
)
from .ptas_dp import INF, NoFeasibleConfiguration, PtasParams
from .transforms import build_hat_tree, exact_d_tilde, split_by_distance

OVERRIDE_KEYS = {
    "L": "min_subtour_demand",
    "M": "max_tours_per_component",
    "xsize": "x_set_size",
    "sumcap": "sum_list_cap",
    "xstrategy": "x_strategy",
    "gammak": "gamma_k",
    "dtilde": "d_tilde",
    "xvalues": "x_values",
}


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def parse_overrides(text: str | None) -> dict:
    out: dict = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in OVERRIDE_KEYS:
            raise UsageError(f"unknown override {key!r}; known: {', '.join(OVERRIDE_KEYS)}")
        field = OVERRIDE_KEYS[key]
        if field == "x_strategy":
            out[field] = value
        elif field == "d_tilde":
            out[field] = value if value in ("theory", "exact") else Fraction(value)
        elif field == "x_values":
            out[field] = tuple(int(x) for x in value.split(":"))
        elif value == "inf":
            out[field] = INF
        else:
            out[field] = int(value)
    return out


def build_params(args, k: int) -> PtasParams:
    overrides = parse_overrides(args.override)
    eps = Fraction(args.eps)
    if args.preset == "exhaustive":
        return PtasParams.exhaustive(epsilon=eps, **overrides)
    return PtasParams.from_epsilon(eps, k, **overrides)


# -- subcommands -----------------------------------------------------------------------


def cmd_gen(args) -> int:
    kw = {"k": args.k}
    if args.family == "random_binary":
        kw["terminals"] = args.terminals
    elif args.family == "caterpillar":
        kw["length"] = args.length
    elif args.family == "star":
        kw["weights"] = [Fraction(w) for w in args.weights.split(",")]
    elif args.family == "fig5":
        kw["m"] = args.m
    if args.family in ("random_binary", "caterpillar"):
        kw["max_weight"] = args.max_weight
    inst = generate(args.family, args.seed, **kw)
    doc = instance_to_dict(inst)
    doc["metadata"] = {"family": args.family, "seed": args.seed, **{k: str(v) for k, v in kw.items()}}
    _emit(json.dumps(doc, indent=2) + "\n", args.output)
    return 0


def cmd_solve(args) -> int:
    inst = read_instance(_read(args.instance))
    params = build_params(args, inst.capacity) if args.algo == "ptas" else None
    sol, meta = run_algo(
        inst, args.algo, params, splittable=args.splittable,
        peel_threshold=math.inf if args.peel is None else args.peel, bands=args.bands,
    )
    _emit(write_solution(sol, meta), args.output)
    return 0


def cmd_verify(args) -> int:
    inst = read_instance(_read(args.instance))
    sol = read_solution(_read(args.solution))
    report = verify(inst, sol)
    sys.stdout.write(json.dumps(report.as_dict(), indent=2) + "\n")
    return 0 if report.feasible else 1


def cmd_lb(args) -> int:
    inst = read_instance(_read(args.instance))
    doc = {
        "lb_edge_ceiling": str(lb_edge(inst, "ceiling")),
        "lb_edge_fractional": str(lb_edge(inst, "fractional")),
        "lb_radial": str(lb_radial(inst)),
        "tree_tsp": str(tree_tsp_cost(inst)),
    }
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_decompose(args) -> int:
    inst = read_instance(_read(args.instance))
    norm, vmap = normalize(inst)
    dec = decompose(norm, args.gamma_k)
    report = check_decomposition(norm, dec, args.gamma_k)
    doc = {
        "normalized": instance_to_dict(norm),
        "vertex_map": {str(t): s for t, s in sorted(vmap.backward.items())},
        "decomposition": decomposition_to_dict(norm, dec),
        "checks": report.checks,
        "violations": report.violations,
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.output)
    return 0 if report.ok else 1


def cmd_transform(args) -> int:
    inst = read_instance(_read(args.instance))
    files: dict[str, str] = {}
    if args.bands is not None:
        bands = split_by_distance(inst, args.bands, args.i0)
        mapping = {
            "inv_eps": bands.inv_eps,
            "i0": bands.i0,
            "sets": [{"tag": s.tag, "file": f"{s.tag}.json", "terminals": list(s.terminals)}
                     for s in bands.sets],
        }
        for s in bands.sets:
            files[f"{s.tag}.json"] = write_instance(s.instance)
    else:
        if args.gamma_k is None:
            raise UsageError("--hat-tree needs --gamma-k")
        norm, vmap = normalize(inst)
        dec = decompose(norm, args.gamma_k)
        d_tilde = exact_d_tilde(norm, dec) if args.d_tilde is None else Fraction(args.d_tilde)
        hat = build_hat_tree(norm, dec, d_tilde)
        files["normalized.json"] = write_instance(norm)
        files["hat.json"] = write_instance(hat.instance)
        mapping = {
            "d_tilde": str(d_tilde),
            "normalized_to_input": {str(t): s for t, s in sorted(vmap.backward.items())},
            "hat_to_normalized": {str(t): s for t, s in sorted(hat.vertex_map.backward.items())},
            "critical": sorted(hat.critical),
            "attachments": [
                {"component": cid, "copy": hat.copy_of[cid], "critical": z, "weight": str(w)}
                for cid, (z, w) in sorted(hat.attachment.items())
            ],
        }
    files["mapping.json"] = json.dumps(mapping, indent=2) + "\n"
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    else:
        docs = {name: json.loads(text) for name, text in files.items()}
        sys.stdout.write(json.dumps(docs, indent=2) + "\n")
    return 0


def cmd_bench(args) -> int:
    if args.corpus:
        corpus = corpus_from_dir(args.corpus)
    else:
        kw = {"k": args.k}
        if args.family == "random_binary":
            kw["terminals"] = args.terminals
        elif args.family == "caterpillar":
            kw["length"] = args.length
        elif args.family == "fig5":
            kw["m"] = args.m
        else:
            raise UsageError("bench generates random_binary, caterpillar or fig5 corpora")
        if args.family == "fig5":
            corpus = [(f"fig5-k{args.k}-m{args.m}", generate("fig5", 0, **kw))]
        else:
            corpus = corpus_from_family(args.family, args.count, args.seed, **kw)
    algos = [a.strip() for a in args.algos.split(",")]
    for a in algos:
        if a not in ALGOS:
            raise UsageError(f"unknown algorithm {a!r}")
    params = None
    if "ptas" in algos and (args.override or args.preset == "exhaustive"):
        params = build_params(args, corpus[0][1].capacity if corpus else 1)
    report = bench(corpus, algos, args.output, params=params, jobs=args.jobs, seed=args.seed)
    if args.output is None:
        from .bench import render_table

        sys.stdout.write(render_table(report))
    return 0


def _add_ptas_options(p) -> None:
    p.add_argument("--eps", default="1/2", help="epsilon as a rational, e.g. 1/3")
    p.add_argument("--preset", choices=("theory", "exhaustive"), default="theory",
                   help="theory: worst-case constants for --eps; exhaustive: vacuous caps")
    p.add_argument("--override", help="comma list, e.g. L=1,M=8,xsize=3,sumcap=4,xstrategy=geometric_grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treecvrp", description="Capacitated vehicle routing on trees")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("family", choices=FAMILIES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=3, help="capacity")
    p.add_argument("--terminals", type=int, default=8)
    p.add_argument("--length", type=int, default=6)
    p.add_argument("--weights", default="1,1,4")
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--max-weight", type=int, default=10)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve an instance")
    p.add_argument("instance")
    p.add_argument("--algo", choices=ALGOS, default="itp")
    _add_ptas_options(p)
    p.add_argument("--bands", type=int, metavar="INV_EPS",
                   help="split into distance bands with base INV_EPS and solve each")
    p.add_argument("--splittable", action="store_true", help="expand non-unit demands")
    p.add_argument("--peel", type=float, metavar="THRESHOLD",
                   help="dispatch full tours to terminals with demand > THRESHOLD*k first")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check a solution")
    p.add_argument("instance")
    p.add_argument("solution")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("lb", help="lower bounds")
    p.add_argument("instance")
    p.set_defaults(func=cmd_lb)

    p = sub.add_parser("decompose", help="component decomposition of the normalized tree")
    p.add_argument("instance")
    p.add_argument("--gamma-k", type=int, required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("transform", help="distance bands or height-reduced tree")
    p.add_argument("instance")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--bands", type=int, metavar="INV_EPS")
    mode.add_argument("--hat-tree", action="store_true")
    p.add_argument("--i0", type=int, default=0)
    p.add_argument("--gamma-k", type=int)
    p.add_argument("--d-tilde")
    p.add_argument("-o", "--output", help="directory for the emitted files")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("bench", help="benchmark algorithms on a corpus")
    p.add_argument("--corpus", help="directory of instance files")
    p.add_argument("--family", default="random_binary")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--terminals", type=int, default=8)
    p.add_argument("--length", type=int, default=6)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--algos", default="exact,itp,greedy")
    _add_ptas_options(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", help="directory for report.json, report.txt, timings.json")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (ValueError, InfeasibleOutput, NoFeasibleConfiguration, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
