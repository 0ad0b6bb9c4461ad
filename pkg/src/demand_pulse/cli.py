"""Command-line entry point: ``demand-pulse <subcommand> --config PATH``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .dtw import COST_MODES, dtw
from .errors import ConfigError, DataError, InvariantViolation, MissingIntermediate, StageError
from .lag import DEFAULT_MAX_OFFSET, tlcc_sweep
from .pipeline import STAGES, run, run_stage
from .series import DateIndexedSeries, align_common_dates

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

logger = logging.getLogger("demand_pulse")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_series(path: str, label: str | None = None) -> DateIndexedSeries:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"series file not found: {p}")
    return DateIndexedSeries.from_csv(p.read_text(encoding="utf-8"), label or p.stem)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="demand-pulse", description="Taxi demand recovery correlation pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", type=Path, required=config_required, help="pipeline config file")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="run every stage in order"))
    common(sub.add_parser("ingest", help="clean and aggregate the raw input files"))
    for stage in ("correlate", "spatial", "report"):
        common(sub.add_parser(stage, help=f"run the {stage} stage from existing intermediates"))

    p = sub.add_parser("dtw", help="DTW stage, or a single pair with --series/--target")
    common(p, config_required=False)
    p.add_argument("--series", help="date,value CSV compared against --target")
    p.add_argument("--target", help="date,value CSV")
    p.add_argument("--normalization", choices=("zscore", "minmax", "none"), default="zscore")
    p.add_argument("--cost", choices=COST_MODES, default="absolute")

    p = sub.add_parser("tlcc", help="TLCC stage, or a single pair with --x/--y")
    common(p, config_required=False)
    p.add_argument("--x", help="date,value CSV of the candidate leader")
    p.add_argument("--y", help="date,value CSV of the benchmark series")
    p.add_argument("--max-offset", type=int, default=DEFAULT_MAX_OFFSET)

    p = sub.add_parser("fixture", help="write the synthetic fixture dataset to a directory")
    p.add_argument("directory", type=Path)
    return parser


def _adhoc_dtw(args) -> int:
    q = _read_series(args.series)
    c = _read_series(args.target)
    result = dtw(q, c, args.normalization, args.cost)
    print(json.dumps(result.to_json_obj()))
    return EXIT_OK


def _adhoc_tlcc(args) -> int:
    x, y = align_common_dates(_read_series(args.x), _read_series(args.y))
    profile = tlcc_sweep(x, y, args.max_offset, threads=args.threads)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "profile.csv").write_text(profile.to_csv(), encoding="utf-8", newline="")
    print(json.dumps(profile.summary()))
    return EXIT_OK


def _dispatch(args) -> int:
    if args.command == "fixture":
        from .fixture import write

        write(args.directory)
        print(args.directory / "fixture.ini")
        return EXIT_OK
    if args.command == "dtw" and args.config is None:
        if not (args.series and args.target):
            raise _UsageError("dtw needs --config, or both --series and --target")
        return _adhoc_dtw(args)
    if args.command == "tlcc" and args.config is None:
        if not (args.x and args.y):
            raise _UsageError("tlcc needs --config, or both --x and --y")
        return _adhoc_tlcc(args)
    if args.threads < 1:
        raise _UsageError("--threads must be >= 1")
    config = load_config(args.config)
    out = args.out if args.out is not None else config.output_dir
    if args.command == "run":
        manifest = run(config, out, threads=args.threads)
        print(json.dumps({"output": str(out), "stages": list(manifest["stages"])}))
    else:
        rows = run_stage(args.command, config, out, threads=args.threads)
        print(json.dumps({"stage": args.command, "output": str(out), **rows}))
    return EXIT_OK


class _UsageError(Exception):
    pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except (_UsageError, ConfigError, MissingIntermediate) as exc:
        print(f"demand-pulse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"demand-pulse: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL if isinstance(exc.cause, InvariantViolation) or not isinstance(exc.cause, DataError) else EXIT_DATA
    except InvariantViolation as exc:
        print(f"demand-pulse: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except DataError as exc:
        print(f"demand-pulse: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
