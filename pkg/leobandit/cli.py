"""
Command line front end.

    leobandit run --scale desk --epsilon 0.5 --out results/
    leobandit preset fig3-epsilon --out results/ --jobs 4
    leobandit validate --config scenario.ini
    leobandit dump-catalog --config scenario.ini --set beam_allocation=nba

Every configuration field can also be set through `LEOBANDIT_<FIELD>` environment variables,
the output directory, scale, configuration file and jobs through `LEOBANDIT_OUT`,
`LEOBANDIT_SCALE`, `LEOBANDIT_CONFIG` and `LEOBANDIT_JOBS`.
"""
import argparse
import logging
import os
import sys
import typing as th

from . import __version__, reports
from .action_space import build_catalog
from .config import ENV_PREFIX, SCALES, parse_config
from .engine import run_simulation
from .errors import ConfigurationError, LeobanditError, SweepError
from .geometry import build_constellation
from .presets import PRESETS, run_preset

logger = logging.getLogger(__name__)


def _assignment(text: str) -> th.Tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value.strip()


def parser(environ: th.Optional[th.Mapping[str, str]] = None) -> argparse.ArgumentParser:
    environ = os.environ if environ is None else environ

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default=environ.get(f"{ENV_PREFIX}CONFIG"),
        help="INI-style scenario file ([section] headers, key = value lines).",
    )
    common.add_argument("--scale", choices=tuple(SCALES), default=environ.get(f"{ENV_PREFIX}SCALE"))
    common.add_argument("--seed", type=int, help="Scenario seed.")
    common.add_argument("--allocator", help="Allocator name or import path, e.g. mmral, random, power_only.")
    common.add_argument("--epsilon", type=float, help="Exploration threshold in [0, 1].")
    common.add_argument("--iterations", type=int, help="Number of allocation iterations.")
    common.add_argument(
        "--set",
        dest="assignments",
        type=_assignment,
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override any configuration field; values may be expressions, e.g. serving_radius_km='3 * beam_radius_km'.",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log per-iteration progress.")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors.")

    main_parser = argparse.ArgumentParser(prog="leobandit", description="Multi-LEO bandit resource allocation simulator")
    main_parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbs = main_parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", parents=[common], help="Run one scenario.")
    run.add_argument("--out", default=environ.get(f"{ENV_PREFIX}OUT", "results"), help="Output directory.")
    run.add_argument("--name", default="run", help="Stem of the output files.")

    preset = verbs.add_parser("preset", parents=[common], help="Run a named experiment sweep.")
    preset.add_argument("name", help=f"One of: {', '.join(PRESETS)}.")
    preset.add_argument("--out", default=environ.get(f"{ENV_PREFIX}OUT", "results"), help="Output directory.")
    preset.add_argument("--jobs", type=int, default=int(environ.get(f"{ENV_PREFIX}JOBS", 1)), help="Worker processes.")
    preset.add_argument("--seeds", type=int, nargs="+", help="Seeds overriding the preset's.")

    verbs.add_parser("validate", parents=[common], help="Check a configuration without running it.")

    dump = verbs.add_parser("dump-catalog", parents=[common], help="Write the arm catalog and its complexity orders.")
    dump.add_argument("--out", help="CSV file (default: standard output).")
    dump.add_argument("--head", type=int, default=5, help="Arms listed per pool.")
    return main_parser


def overrides_from(args: argparse.Namespace) -> th.Dict[str, th.Any]:
    """Configuration overrides carried by the flags, `--set` assignments last."""
    overrides = {
        key: getattr(args, key)
        for key in ("seed", "allocator", "epsilon", "iterations")
        if getattr(args, key, None) is not None
    }
    overrides.update(dict(args.assignments))
    return overrides


def _configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _config(args: argparse.Namespace, environ: th.Optional[th.Mapping[str, str]]):
    return parse_config(args.config, overrides=overrides_from(args), environ=environ, scale=args.scale or "full")


def main(argv: th.Optional[th.Sequence[str]] = None, environ: th.Optional[th.Mapping[str, str]] = None) -> int:
    """
    Entry point of the `leobandit` command.

    Returns:
        int: 0 on success, 2 on configuration or lookup errors, 1 when a run of a sweep fails.
    """
    args = parser(environ).parse_args(argv)
    _configure_logging(args)
    progress = not args.quiet and sys.stderr.isatty()
    try:
        if args.verb == "run":
            result = run_simulation(_config(args, environ), progress=progress)
            reports.write_run(result, args.out, args.name)
            summary = result.summary
            print(
                f"mean R_tot {summary.mean_total:.6g} bit/s, outage probability {summary.outage_probability:.4f}, "
                f"mean outage rate {summary.mean_outage_rate:.4f} (last {summary.window} iterations)"
            )
        elif args.verb == "preset":
            if args.jobs < 1:
                raise ConfigurationError("--jobs must be at least 1")
            path = run_preset(
                args.name,
                args.out,
                jobs=args.jobs,
                scale=args.scale,
                path=args.config,
                overrides=overrides_from(args),
                environ=environ,
                seeds=args.seeds,
                progress=progress,
            )
            print(path)
        elif args.verb == "validate":
            config = _config(args, environ)
            snapshot = build_constellation(config)
            catalog = build_catalog(config)
            print(
                f"ok: {snapshot.n_satellites} satellites, {snapshot.n_users} users, {config.beam_slots} beams per "
                f"satellite, arms {catalog.size('power')}/{catalog.size('beam')}/{catalog.size('channel')}"
            )
        elif args.verb == "dump-catalog":
            frame = reports.catalog_frame(build_catalog(_config(args, environ)), head=args.head)
            if args.out:
                reports.write_csv(frame, args.out)
            else:
                frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    except SweepError as e:
        logger.error("%s", e)
        return 1
    except LeobanditError as e:
        logger.error("%s", e)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
