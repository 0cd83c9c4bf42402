"""Command-line runner: five batch subcommands driven by a JSON config,
plus `serve` to expose the same runs over HTTP.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from pydantic import ValidationError

from .flow import CflViolation, NumericalFailure
from .grids import SupportOverflowError
from .schemas import RunConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggdiff",
        description="numerical laboratory for aggregation-diffusion free energies on radial grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "energy": "evaluate S, W, F for one profile",
        "classify": "analytic regime classification",
        "probe": "free energy along the mass-invariant dilation family",
        "minimize": "multistart descent to a candidate minimizer",
        "sweep": "parameter sweep of multistart descents",
    }
    for name, help_text in helps.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the JSON run config")
        p.add_argument("--out", default=None, metavar="DIR", help="write CSV/SVG/summary artifacts here")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for sweep points")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    ps = sub.add_parser("serve", help="run the HTTP service")
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8000)
    return parser


def _print_result(command: str, result: dict) -> None:
    if command == "energy":
        print(" ".join(f"{k}={result[k]!r}" for k in ("S", "W", "F", "mass")))
    elif command == "classify":
        for k, v in result.items():
            if k == "notes":
                for note in v:
                    print(f"note: {note}")
            else:
                print(f"{k}={v!r}")
    elif command == "probe":
        for lam, F in result["rows"]:
            print(f"lambda={lam!r} F={F!r}")
        print(f"negative_found={result['negative_found']} fitted_exponent={result['fitted_exponent']!r}")
    elif command == "minimize":
        for row in result["runs"]:
            print(
                f"width={row['width']:g} outcome={row['outcome']} F={row['final_F']!r} "
                f"residual={row['residual']!r} steps={row['steps']}"
            )
        print(f"best_width={result['best_width']:g} estimate={result['estimate']!r}")
    elif command == "sweep":
        for row in result["rows"]:
            print(f"value={row['value']!r} outcome={row['outcome']} i_m={row['i_m']!r} sup={row['sup']!r}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    try:
        with open(args.config) as fh:
            raw = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 3

    try:
        cfg = RunConfig.model_validate(json.loads(raw))
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
    except (json.JSONDecodeError, ValidationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    from . import runs

    try:
        if args.command == "energy":
            result = runs.run_energy(cfg, out_dir=args.out)
        elif args.command == "classify":
            result = runs.run_classify(cfg, out_dir=args.out)
        elif args.command == "probe":
            result = runs.run_probe(cfg, out_dir=args.out)
        elif args.command == "minimize":
            result = runs.run_minimize(cfg, out_dir=args.out)
        else:
            result = runs.run_sweep(cfg, out_dir=args.out, jobs=args.jobs)
    except (NumericalFailure, CflViolation, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (SupportOverflowError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3

    _print_result(args.command, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
