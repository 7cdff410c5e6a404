"""Command line interface.

Exit status is 0 on success, 1 on a usage error and 2 on a data error.
Diagnostics go to stderr; results go to ``--out`` files or stdout.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Mapping, Sequence

from nilmcompare import __version__
from nilmcompare.disaggregation import ExperimentParams, run_experiment
from nilmcompare.errors import DataError
from nilmcompare.events import EventParams, events_per_day_stats
from nilmcompare.ingestion import generate_synthetic, load_household, load_synth_spec, write_household
from nilmcompare.metrics import dataset_summary, nar
from nilmcompare.report import emit_events, emit_report, emit_summary

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("nilmcompare")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_event_flags(p: argparse.ArgumentParser) -> None:
    d = EventParams()
    p.add_argument("--filter-width", type=int, default=d.filter_width, help="median filter width in samples")
    p.add_argument("--kmax", type=int, default=d.k_max, help="largest number of clusters tried")
    p.add_argument("--merge-delta", type=float, default=d.merge_delta, help="merge levels closer than this [W]")
    p.add_argument("--min-dwell", type=int, default=d.min_dwell, help="samples a new state must persist")
    p.add_argument("--elbow-ratio", type=float, default=d.elbow_ratio)
    p.add_argument("--restarts", type=int, default=d.restarts, help="k-means restarts")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--gap-factor", type=float, default=d.gap_factor)
    p.add_argument("--power-type", choices=("P", "Q", "S"), default="P")


def _event_params(args: argparse.Namespace) -> EventParams:
    return EventParams(
        filter_width=args.filter_width,
        k_max=args.kmax,
        elbow_ratio=args.elbow_ratio,
        merge_delta=args.merge_delta,
        min_dwell=args.min_dwell,
        restarts=args.restarts,
        seed=args.seed,
        gap_factor=args.gap_factor,
        power_type=args.power_type,
    )


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="nilmcompare", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs: dict[str, _Parser] = {}

    p = sub.add_parser("summarize", help="one summary row per household")
    p.add_argument("--manifest", required=True, nargs="+")
    _add_event_flags(p)
    p.add_argument("--interval", type=int, help="NAR alignment interval [s]")
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("--out", required=True)
    subs["summarize"] = p

    p = sub.add_parser("events", help="representative states and event counts per submeter")
    p.add_argument("--manifest", required=True)
    _add_event_flags(p)
    p.add_argument("--out", required=True)
    subs["events"] = p

    p = sub.add_parser("nar", help="noise-to-aggregate ratio of a household")
    p.add_argument("--manifest", required=True)
    p.add_argument("--power-type", choices=("P", "Q", "S"), required=True)
    p.add_argument("--interval", type=int)
    subs["nar"] = p

    p = sub.add_parser("experiment", help="train, disaggregate and score one split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--algo", choices=("co", "fhmm"), required=True)
    for flag in ("--train-start", "--train-end", "--test-start", "--test-end"):
        p.add_argument(flag, type=int, required=True, help="Unix seconds")
    p.add_argument("--denoised", action="store_true")
    p.add_argument("--k", type=int, default=ExperimentParams().k, help="states per appliance")
    p.add_argument("--interval", type=int, help="test grid interval [s]")
    _add_event_flags(p)
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("--out", required=True)
    subs["experiment"] = p

    p = sub.add_parser("synth", help="write a synthetic household")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    subs["synth"] = p
    return parser, subs


def _write(path: str, text: str) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")


def _cmd_summarize(args) -> None:
    params = _event_params(args)
    rows = [dataset_summary(load_household(m), params, args.interval) for m in args.manifest]
    _write(args.out, emit_summary(rows, args.format))


def _cmd_events(args) -> None:
    stats = events_per_day_stats(load_household(args.manifest), _event_params(args))
    _write(args.out, emit_events(stats.profiles))


def _cmd_nar(args) -> None:
    house = load_household(args.manifest)
    mains = house.mains_series(args.power_type)
    subs = house.submeter_series(args.power_type)
    if mains is None or subs is None:
        raise DataError(f"{args.power_type} readings missing on mains or submeters")
    result = nar(mains, subs, args.interval)
    if result.exceeds_one:
        log.warning("NAR above 1: submeters sum to more than the mains")
    print(f"{result.ratio:.6f}")


def experiment_echo(args) -> dict[str, object]:
    echo: dict[str, object] = {
        "manifest": args.manifest,
        "algo": args.algo,
        "train_start": args.train_start,
        "train_end": args.train_end,
        "test_start": args.test_start,
        "test_end": args.test_end,
        "denoised": args.denoised,
        "k": args.k,
        "interval": args.interval if args.interval is not None else "auto",
        "power_type": args.power_type,
        "seed": args.seed,
        "filter_width": args.filter_width,
        "kmax": args.kmax,
        "elbow_ratio": args.elbow_ratio,
        "merge_delta": args.merge_delta,
        "min_dwell": args.min_dwell,
        "restarts": args.restarts,
        "gap_factor": args.gap_factor,
    }
    return echo


def replay_argv(meta: Mapping[str, str], out: str) -> list[str]:
    """Rebuild ``experiment`` arguments from a report's ``param.*`` rows."""
    p = {k[len("param.") :]: v for k, v in meta.items() if k.startswith("param.")}
    argv = ["experiment"]
    for key, value in p.items():
        if key == "denoised":
            if value == "True":
                argv.append("--denoised")
            continue
        if key == "interval" and value == "auto":
            continue
        argv += [f"--{key.replace('_', '-')}", value]
    return argv + ["--out", out]


def _cmd_experiment(args) -> None:
    house = load_household(args.manifest)
    params = ExperimentParams(k=args.k, interval=args.interval, events=_event_params(args))
    report = run_experiment(
        house,
        ((args.train_start, args.train_end), (args.test_start, args.test_end)),
        args.algo,
        denoised=args.denoised,
        params=params,
        echo=experiment_echo(args),
    )
    if report.nar > 1:
        log.warning("test aggregate NAR above 1: submeters sum to more than the mains")
    _write(args.out, emit_report(report, args.format))


def _cmd_synth(args) -> None:
    house = generate_synthetic(load_synth_spec(args.spec), args.seed)
    path = write_household(house, args.out_dir)
    log.info("wrote %s", path)


COMMANDS = {
    "summarize": _cmd_summarize,
    "events": _cmd_events,
    "nar": _cmd_nar,
    "experiment": _cmd_experiment,
    "synth": _cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, extra = parser.parse_known_args(argv)
        if extra:
            subs[args.command].print_help(sys.stderr)
            raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
