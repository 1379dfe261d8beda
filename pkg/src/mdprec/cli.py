"""Command line driver.

    mdprec gen           --config gen.json --out DIR [--seed N]
    mdprec solve         --config exp.json [--out DIR] [--stdout]
    mdprec spai-study    --config exp.json [--out DIR] [--jobs N] [--stdout]
    mdprec penalty-sweep --config exp.json [--out DIR] [--jobs N] [--stdout]
    mdprec refine-sweep  --config exp.json [--out DIR] [--stdout]
    mdprec compare       --config exp.json [--out DIR] [--stdout]

Configs are JSON documents; experiment configs follow ExperimentConfig
(unknown keys rejected). Data goes to --out (and stdout with --stdout);
diagnostics go to stderr. Exit codes: 0 success, 2 config error, 3 I/O
error, 4 non-convergence.
"""

import argparse
import json
import os
import sys

from .blockprec import _dataclass_from_dict
from .harness import (ExperimentConfig, run_penalty_sweep, run_refinement_sweep,
                      run_single_solve, run_solver_compare, run_spai_study)
from .probgen import GenConfig, generate, save_system

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NOCONV = 4

_MODE_OF = {
    "spai-study": "spai_study",
    "penalty-sweep": "penalty_sweep",
    "refine-sweep": "refinement_sweep",
    "compare": "solver_compare",
    "solve": "single_solve",
}
_RUNNER = {
    "spai_study": run_spai_study,
    "penalty_sweep": run_penalty_sweep,
    "refinement_sweep": run_refinement_sweep,
    "solver_compare": run_solver_compare,
}


def _build_parser():
    parser = argparse.ArgumentParser(prog="mdprec",
                                     description="penalty-coupled block system toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen", "solve", "spai-study", "penalty-sweep", "refine-sweep", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file or literal JSON")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the generator seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
        p.add_argument("--stdout", action="store_true", help="write the data stream to stdout")
    return parser


def _load_json(text_or_path):
    try:
        if text_or_path.lstrip().startswith("{"):
            return json.loads(text_or_path)
        with open(text_or_path) as f:
            return json.load(f)
    except OSError as e:
        raise _IoError(str(e)) from e
    except json.JSONDecodeError as e:
        raise _ConfigError(f"malformed JSON config: {e}") from e


class _ConfigError(Exception):
    pass


class _IoError(Exception):
    pass


def _cmd_gen(args):
    doc = _load_json(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        if "solid_grid" in doc:
            doc["solid_grid"] = tuple(doc["solid_grid"])
        cfg = _dataclass_from_dict(GenConfig, doc, "gen")
    except (TypeError, ValueError) as e:
        raise _ConfigError(str(e)) from e
    if not args.out:
        raise _ConfigError("gen requires --out DIR")
    system, meta = generate(cfg)
    try:
        files = save_system(system, args.out, meta)
    except OSError as e:
        raise _IoError(str(e)) from e
    print(f"wrote {len(files)} files to {args.out}", file=sys.stderr)
    if args.stdout:
        json.dump({"files": files, "n_beam": system.n_beam, "n_solid": system.n_solid},
                  sys.stdout)
        print()
    return EXIT_OK


def _cmd_experiment(args, mode):
    doc = _load_json(args.config)
    doc["mode"] = mode
    try:
        cfg = ExperimentConfig.from_dict(doc)
        if args.seed is not None:
            cfg = _reseed(cfg, args.seed)
    except (TypeError, ValueError) as e:
        raise _ConfigError(str(e)) from e

    if mode == "single_solve":
        sol_path = os.path.join(args.out, "solution.vec") if args.out else None
        if args.out:
            os.makedirs(args.out, exist_ok=True)
        report, ok = run_single_solve(cfg, solution_path=sol_path)
        text = json.dumps(report, indent=1)
        if args.out:
            _write(os.path.join(args.out, "solve_report.json"), text)
        if args.stdout or not args.out:
            print(text)
        print(f"converged={report['converged']} iterations={report['iterations']}",
              file=sys.stderr)
        return EXIT_OK if ok else EXIT_NOCONV

    csv_text = _RUNNER[mode](cfg, jobs=args.jobs)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, f"{mode}.csv"), csv_text)
        print(f"wrote {mode}.csv to {args.out}", file=sys.stderr)
    if args.stdout or not args.out:
        sys.stdout.write(csv_text)
    return EXIT_OK


def _reseed(cfg, seed):
    from dataclasses import replace
    return replace(cfg, gen=replace(cfg.gen, seed=seed))


def _write(path, text):
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise _IoError(str(e)) from e


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        return _cmd_experiment(args, _MODE_OF[args.command])
    except _ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _IoError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
