"""Command-line front end.

    python -m src.cli.main index instance.json --eps 1e-3
    python -m src.cli.main simulate index-gap balanced --exact
    python -m src.cli.main gap "lp-gap(50, 1e-5)"
    python -m src.cli.main emit "replenish-gap(10)" --out replenish.json

Exit codes: 0 success, 2 input error, 3 computation error.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

from pydantic import ValidationError

# --- Configuration ---
EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3

logger = logging.getLogger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(prog="restless", description="Restless bandit index policies and gap reports.")
    parser.add_argument("--config", help="solver config YAML (overrides RESTLESS_CONFIG)")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    parser.add_argument("--dump-lp", metavar="DIR", help="write every solved LP in CPLEX-LP format")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--eps", type=float, default=None, help="balanced-penalty tolerance")
        p.add_argument("--tmax", type=int, default=None, help="belief-age or LP truncation")
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    def sim_flags(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--burnin", type=int)
        p.add_argument("--reps", type=int)
        p.add_argument("--jobs", type=int)

    p = sub.add_parser("index", help="balanced penalty and index parameters")
    p.add_argument("instance", help="instance file or gallery id")
    p.add_argument("--whittle-ages", type=int, default=5)
    common(p)

    p = sub.add_parser("simulate", help="evaluate a policy by simulation or exactly")
    p.add_argument("instance", help="instance file or gallery id")
    p.add_argument("policy")
    p.add_argument("--exact", action="store_true", help="exact stationary-chain value")
    common(p)
    sim_flags(p)

    p = sub.add_parser("gap", help="claim-versus-measured report for a gallery family")
    p.add_argument("gallery_id")
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    common(p)
    sim_flags(p)

    p = sub.add_parser("emit", help="write a gallery instance file")
    p.add_argument("gallery_id")
    p.add_argument("--out")
    return parser


def _sim_config(args):
    from src.simulate.policy_simulator import SimConfig

    overrides = {"seed": args.seed, "horizon": args.horizon, "burn_in": args.burnin,
                 "replications": args.reps, "n_jobs": args.jobs}
    return SimConfig(**{k: v for k, v in overrides.items() if v is not None})


def _gallery_id(args):
    from src.gallery.instances import GalleryId

    gid = GalleryId.parse(args.gallery_id)
    if args.n is not None or args.beta is not None:
        gid = GalleryId(gid.name, args.n if args.n is not None else gid.n,
                        args.beta if args.beta is not None else gid.beta)
    return gid


def _write(args, payload):
    if hasattr(payload, "to_csv") and args.format == "csv":
        text = payload.to_csv(index=False)
    elif hasattr(payload, "to_dict") and hasattr(payload, "columns"):
        text = json.dumps(payload.to_dict(orient="records"), indent=2, default=str)
    else:
        text = json.dumps(payload, indent=2, default=str)
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
        logger.info(f"Result written to {args.out}")
    else:
        print(text)


def run(args):
    from src.cli import commands
    from src.core.settings import section
    from src.lp.simplex import enable_lp_dump

    if args.dump_lp:
        Path(args.dump_lp).mkdir(parents=True, exist_ok=True)
        enable_lp_dump(args.dump_lp)
    eps = getattr(args, "eps", None) or section("feedback")["epsilon"]

    if args.command == "index":
        instance = commands.resolve_instance(args.instance)
        _write(args, commands.cmd_index(instance, eps, args.tmax, args.whittle_ages))
    elif args.command == "simulate":
        instance = commands.resolve_instance(args.instance)
        result = commands.cmd_simulate(instance, args.policy, _sim_config(args), eps, args.exact, args.tmax)
        if isinstance(result, dict):
            _write(args, result)
        elif args.format == "csv":
            _write(args, result.trace)
        else:
            _write(args, result.to_dict())
    elif args.command == "gap":
        _write(args, commands.cmd_gap(_gallery_id(args), _sim_config(args)))
    elif args.command == "emit":
        text = commands.cmd_emit(args.gallery_id, args.out)
        if not args.out:
            print(text)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(message)s')
    if args.config:
        os.environ["RESTLESS_CONFIG"] = str(Path(args.config).resolve())

    from src.core.errors import InstanceError, SolverError

    try:
        return run(args)
    except ValidationError as e:
        for err in e.errors():
            path = ".".join(str(part) for part in err["loc"])
            print(f"input error: {path}: {err['msg']}", file=sys.stderr)
        return EXIT_INPUT
    except (InstanceError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"input error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as e:
        print(f"solver error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
