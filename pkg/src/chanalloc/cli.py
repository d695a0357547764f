"""Command-line entry points for scenario generation and experiments."""
from __future__ import annotations

import argparse
import json
import sys

from .auction import RcaConfig
from .connectivity import LinkModel
from .harness import (
    ExperimentSpec,
    MethodSpec,
    default_comparison_methods,
    default_grid,
    optimal_method_spec,
    run_comparison,
    run_sweep,
)
from .matching import Quotas
from .pipeline import METHODS, allocate, compute_metrics
from .scenario import OBSTACLE_FRACTION, Scenario, generate_scenario


def _load_link(path: str | None) -> LinkModel:
    if path is None:
        return LinkModel()
    with open(path, encoding="utf-8") as f:
        return LinkModel.from_dict(json.load(f))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--setup", choices=["ss", "ms", "ls"], default="ss")
    p.add_argument("--seed", type=int, default=1, help="base RNG seed")
    p.add_argument("--link-config", metavar="FILE", help="JSON file with link model overrides")
    p.add_argument("--obstacle-fraction", type=float, default=OBSTACLE_FRACTION)


def _add_experiment(p: argparse.ArgumentParser) -> None:
    _add_common(p)
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--out", metavar="DIR", default=".", help="output directory for CSVs")
    p.add_argument("--timeout-s", type=float, default=10.0, help="solver budget per instance")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--spec", metavar="FILE", help="JSON ExperimentSpec; overrides other flags")


def _spec_from_args(args, n_runs_default: int) -> ExperimentSpec:
    if args.spec:
        return ExperimentSpec.from_json(args.spec)
    return ExperimentSpec(
        setup=args.setup,
        n_runs=args.runs if args.runs else n_runs_default,
        base_seed=args.seed,
        link=_load_link(args.link_config),
        out_dir=args.out,
        timeout_s=args.timeout_s,
        obstacle_fraction=args.obstacle_fraction,
        jobs=args.jobs,
    )


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="chanalloc",
        description="Preallocation-based combinatorial-auction channel assignment simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a scenario and write it as JSON")
    _add_common(p_gen)
    p_gen.add_argument("--out", metavar="FILE", required=True)

    p_alloc = sub.add_parser("allocate", help="run one allocation and write the result as JSON")
    _add_common(p_alloc)
    p_alloc.add_argument("--scenario", metavar="FILE", help="scenario JSON (else generated)")
    p_alloc.add_argument("--method", choices=METHODS, default="m2mgs")
    p_alloc.add_argument("--q-t", type=int, default=None)
    p_alloc.add_argument("--q-ch", type=int, default=None)
    p_alloc.add_argument("--q-bs", type=int, default=None)
    p_alloc.add_argument("--n-chpbs", type=int, default=None)
    p_alloc.add_argument("--min-ch", type=int, default=2)
    p_alloc.add_argument("--timeout-s", type=float, default=10.0)
    p_alloc.add_argument("--out", metavar="FILE")

    p_m2 = sub.add_parser("sweep-m2mgs", help="quota sweep for the matching preallocation")
    _add_experiment(p_m2)
    p_m2.add_argument("--q-t", type=_int_list, default=None, metavar="LIST")
    p_m2.add_argument("--q-ch", type=_int_list, default=None, metavar="LIST")

    p_rca = sub.add_parser("sweep-rca", help="parameter sweep for the relaxed auction")
    _add_experiment(p_rca)
    p_rca.add_argument("--q-bs", type=_int_list, default=None, metavar="LIST")
    p_rca.add_argument("--n-chpbs", type=_int_list, default=None, metavar="LIST")
    p_rca.add_argument("--min-ch", type=int, default=2)

    p_cmp = sub.add_parser("compare", help="compare all methods at optimal parameters")
    _add_experiment(p_cmp)
    p_cmp.add_argument(
        "--methods", default=None, help="comma-separated subset of: " + ",".join(METHODS)
    )

    args = parser.parse_args(argv)

    if args.command == "generate":
        scenario = generate_scenario(
            args.setup, args.seed, _load_link(args.link_config), args.obstacle_fraction
        )
        scenario.save(args.out)
        print(f"wrote {args.out}")
        return 0

    if args.command == "allocate":
        link = _load_link(args.link_config)
        if args.scenario:
            scenario = Scenario.load(args.scenario)
        else:
            scenario = generate_scenario(args.setup, args.seed, link, args.obstacle_fraction)
        params = None
        if args.method == "m2mgs":
            q_t = args.q_t if args.q_t is not None else 8
            q_ch = args.q_ch if args.q_ch is not None else 3
            params = Quotas(q_t, q_ch)
        elif args.method == "rca":
            params = RcaConfig(
                q_bs=args.q_bs if args.q_bs is not None else 3,
                n_chpbs=args.n_chpbs if args.n_chpbs is not None else 3,
                min_channels=args.min_ch,
            )
        result = allocate(
            scenario, link, method=args.method, params=params, seed=args.seed,
            solver_timeout_s=args.timeout_s,
        )
        metrics = compute_metrics(result)
        print(f"total utility: {result.total_utility:.6g}")
        print(f"not preallocated channels: {metrics.n_unpreallocated_channels}")
        print(f"free tenant slots: {metrics.n_free_tenant_slots}")
        print(f"starved tenants: {metrics.n_starved_tenants}")
        if result.infeasible:
            print(f"infeasible: {result.infeasible_note}")
        if args.out:
            result.save(args.out)
            print(f"wrote {args.out}")
        return 0

    if args.command == "sweep-m2mgs":
        spec = _spec_from_args(args, 200)
        grid = default_grid(spec.setup, "m2mgs")
        if args.q_t:
            grid["q_t"] = args.q_t
        if args.q_ch:
            grid["q_ch"] = args.q_ch
        run_sweep(spec, "m2mgs", grid)
        print(f"wrote sweep CSVs to {spec.out_dir}")
        return 0

    if args.command == "sweep-rca":
        spec = _spec_from_args(args, 200)
        grid = default_grid(spec.setup, "rca")
        if args.q_bs:
            grid["q_bs"] = args.q_bs
        if args.n_chpbs:
            grid["n_chpbs"] = args.n_chpbs
        run_sweep(spec, "rca", grid)
        print(f"wrote sweep CSVs to {spec.out_dir}")
        return 0

    if args.command == "compare":
        spec = _spec_from_args(args, 500)
        if not spec.methods:
            if args.methods:
                spec.methods = [
                    optimal_method_spec(m.strip(), spec.setup) for m in args.methods.split(",")
                ]
            else:
                spec.methods = default_comparison_methods(spec.setup)
        run_comparison(spec)
        print(f"wrote comparison CSVs to {spec.out_dir}")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
