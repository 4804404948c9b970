"""
Command line interface::

    adaptive-rbffd solve    [--config FILE] [overrides]
    adaptive-rbffd converge [--config FILE] [overrides]
    adaptive-rbffd nodes    [--config FILE] [overrides]

Exit status is 0 on success, 1 on a configuration error and 2 on a numerical
failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

from .assembly import AssemblyError
from .experiments import ConfigError, RunConfig, StageError, run_convergence, run_solve
from .geometry import GeometryError, generate_nodes, write_nodes_csv
from .problems import PROBLEMS

logger = logging.getLogger("adaptive_rbffd")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--problem", choices=sorted(PROBLEMS))
    common.add_argument("--N", type=int, nargs="+", help="node count(s)")
    common.add_argument("--g", type=int, help="global order of convergence")
    common.add_argument("--adaptive", action=argparse.BooleanOptionalAction, default=None)
    common.add_argument("--generator", help="node generator kind")
    common.add_argument("--nodes", type=Path, help="read the node set from a CSV file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="adaptive-rbffd", description=__doc__.splitlines()[1].strip())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve one problem instance")
    sub.add_parser("converge", parents=[common], help="run a convergence sweep over N")
    sub.add_parser("nodes", parents=[common], help="write generated node sets as CSV")
    return parser


def make_config(args) -> RunConfig:
    data = {}
    if args.config is not None:
        data = asdict(RunConfig.from_json(args.config))
    overrides = {"problem": args.problem, "N": args.N, "g": args.g,
                 "adaptive": args.adaptive, "seed": args.seed, "out_dir": args.out}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.generator is not None:
        data["generator"] = {"kind": args.generator}
    if args.nodes is not None:
        data["generator"] = {"kind": "csv", "nodes_csv": str(args.nodes)}
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        if args.command == "converge" and len(cfg.N) < 3:
            raise ConfigError("a convergence sweep needs at least 3 values of N")
        if args.command == "solve" and len(cfg.N) != 1:
            raise ConfigError("solve takes a single N")
    except (ConfigError, GeometryError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "nodes":
            out = Path(cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            domain = PROBLEMS[cfg.problem](**cfg.problem_params).domain
            for n in cfg.N:
                nodes = generate_nodes(cfg.generator["kind"], n, domain,
                                       cfg.generator_params, seed=cfg.seed)
                path = out / f"nodes_N{n}.csv"
                write_nodes_csv(nodes, path)
                print(f"{path}: {len(nodes)} nodes")
        elif args.command == "solve":
            rec = run_solve(cfg)
            print(f"N={rec.N} h_e={rec.h_e:.4g} nnz={rec.nnz} "
                  f"max_error={rec.max_error:.3e} rel_l2={rec.rel_l2:.3e} degrees={rec.degrees}")
        else:
            records, slope = run_convergence(cfg)
            for rec in records:
                print(f"N={rec.N} h_e={rec.h_e:.4g} nnz={rec.nnz} max_error={rec.max_error:.3e}")
            print("slope: below noise floor" if math.isnan(slope) else f"slope: {slope:.3f}")
    except GeometryError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, AssemblyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
