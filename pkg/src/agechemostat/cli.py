"""Command-line entry point.

Subcommands: ``simulate``, ``validate``, ``refine``, ``perturb`` and
``oracle-compare``.  Exit status is 0 on success or when every check
passes, 1 when a check fails and 2 on bad input or solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ChemostatError, ConvergenceError
from .scenario import (load_scenario, oracle_compare, perturb_experiment, refine_study,
                       run_scenario)

logger = logging.getLogger("agechemostat")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _out(args, sc) -> Path:
    out = Path(args.out if args.out else sc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    sc = load_scenario(args.config)
    res = run_scenario(sc, _out(args, sc))
    s = res.traj.summary()
    print(f"simulated {len(res.traj) - 1} steps in {s['windows']} windows "
          f"({s['total_iterations']} Picard sweeps); files in {_out(args, sc)}")
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = load_scenario(args.config)
    res = run_scenario(sc, _out(args, sc), axioms=True)
    for r in res.reports:
        print(r.to_text())
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_refine(args) -> int:
    sc = load_scenario(args.config)
    table = refine_study(sc, args.levels, threads=args.threads)
    out = _out(args, sc)
    (out / "refine.csv").write_text(table.to_text())
    rep = table.report()
    (out / "refine.txt").write_text(rep.to_keyvalue() + "\n")
    print(table.to_text(), end="")
    print(rep.to_text())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_perturb(args) -> int:
    sc = load_scenario(args.config)
    rep = perturb_experiment(sc, args.epsilon, threads=args.threads)
    (_out(args, sc) / "dependence.txt").write_text(rep.to_keyvalue() + "\n")
    print(rep.to_text())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_oracle(args) -> int:
    sc = load_scenario(args.config)
    rep = oracle_compare(sc)
    (_out(args, sc) / "oracle.txt").write_text(rep.to_keyvalue() + "\n")
    print(rep.to_text())
    return EXIT_OK if rep.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agechemostat",
                                description="Age-structured chemostat solver and checks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fun, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="scenario INI file")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--threads", type=int, default=1)
        s.set_defaults(func=fun)
        return s

    add("simulate", cmd_simulate, "solve and write all run artifacts")
    add("validate", cmd_validate, "solve, write artifacts and print every check")
    s = add("refine", cmd_refine, "grid refinement study")
    s.add_argument("--levels", type=int, default=3)
    s = add("perturb", cmd_perturb, "continuous dependence experiment")
    s.add_argument("--epsilon", type=float, default=1e-2)
    add("oracle-compare", cmd_oracle, "compare with the moment-closure oracle")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: solver failed: {exc}; try a smaller dt", file=sys.stderr)
        return EXIT_ERROR
    except ChemostatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
