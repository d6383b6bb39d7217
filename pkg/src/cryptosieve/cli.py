"""``cryptosieve`` command line.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Results go to
stdout unless ``--out`` is given; logging goes to stderr.
"""

import argparse
import logging
import math
import sys

from . import __version__
from .calibration import DEFAULT_REPLICATIONS, CalibrationResult, calibrate_threshold
from .detectors import DetectorConfig, Direction, Drift, Method
from .errors import SieveError
from .evaluation import (DEFAULT_NU_GRID, curves_to_json, estimate_ced, estimate_pv,
                         export_curves)
from .indicator import AlphabetMode
from .models import ChangePointPrior, SeededRng, ShiftModel, gen_stream
from .scanner import (DEFAULT_BLOCK, STOP_AT_FIRST_ALARM, RestartPolicy,
                      ScanConfig, scan_image, write_report)

log = logging.getLogger("cryptosieve")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _shift(text):
    c = float(text)
    if not c > 1.0:
        raise argparse.ArgumentTypeError("shift c must be > 1 (presets: 1.1, 1.2, 1.3)")
    return c


def _theta(text):
    if text.lower() in ("inf", "never", "none"):
        return math.inf
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("theta must be >= 1 or 'inf'")
    return value


def _add_model(p, required=False):
    p.add_argument("--c", type=_shift, default=None if required else 1.2,
                   required=required, help="pre-change scale (presets 1.1, 1.2, 1.3)")
    p.add_argument("--df", type=int, default=None if required else 255, required=required,
                   help="degrees of freedom of the indicator")


def _add_detector(p, required=True):
    p.add_argument("--method", required=required, choices=[m.value for m in Method])
    p.add_argument("--nu", type=float, default=None, help="hazard for shiryaev-bayes")
    p.add_argument("--direction", choices=[d.value for d in Direction], default="below",
                   help="Shewhart tail")
    p.add_argument("--drift", choices=[d.value for d in Drift], default="exact-llr")


def _add_mc(p, reps):
    p.add_argument("--reps", type=int, default=reps)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = all cores")


def build_parser():
    parser = _Parser(prog="cryptosieve", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scan", help="scan a raw image for encrypted regions")
    p.add_argument("path", help="image file, or - for standard input")
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK)
    p.add_argument("--alphabet", default="fixed", help="observed | fixed | fixed:<n>")
    _add_detector(p, required=False)
    _add_model(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--threshold", type=float)
    g.add_argument("--target-arl0", type=float)
    g.add_argument("--calibration", help="calibration JSON to take the detector from")
    p.add_argument("--restart", choices=["restart", "stop"], default="restart")
    p.add_argument("--skip", type=int, default=0, help="blocks to skip after an alarm")
    p.add_argument("--max-blocks", type=int, default=None)
    p.add_argument("--no-fallback", action="store_true",
                   help="skip single-symbol blocks in observed mode instead of scoring them")
    p.add_argument("--trace-csv", default=None, help="also write the per-block trace here")
    p.add_argument("--out", default=None)
    _add_mc(p, DEFAULT_REPLICATIONS)

    p = sub.add_parser("calibrate", help="calibrate a threshold to a target ARL0")
    _add_detector(p)
    _add_model(p)
    p.add_argument("--target-arl0", type=float, default=100.0)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_mc(p, DEFAULT_REPLICATIONS)

    p = sub.add_parser("evaluate-ced", help="conditional expected delay curve")
    p.add_argument("--calibration", required=True)
    p.add_argument("--theta-max", type=int, default=50)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    _add_mc(p, 10_000)

    p = sub.add_parser("evaluate-pv", help="predictive value curve")
    p.add_argument("--calibration", required=True)
    p.add_argument("--nu", type=float, action="append", default=None,
                   help="geometric hazard, repeatable (default 0.01 0.05 0.10)")
    p.add_argument("--t-max", type=int, default=100)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    _add_mc(p, 100_000)

    p = sub.add_parser("simulate", help="emit a synthetic indicator stream as CSV")
    _add_model(p)
    p.add_argument("--theta", type=_theta, default=math.inf)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    return parser


def _emit(data, out):
    if isinstance(data, str):
        data = data.encode("utf-8")
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        with open(out, "wb") as f:
            f.write(data)


def _load_calibration(path):
    with open(path, "r", encoding="utf-8") as f:
        return CalibrationResult.from_json(f.read())


def _cmd_calibrate(args):
    if args.method == Method.SHIRYAEV_BAYES.value and args.nu is None:
        raise UsageError("--nu is required for shiryaev-bayes")
    result = calibrate_threshold(args.method, ShiftModel(args.df, args.c),
                                 target_arl0=args.target_arl0, replications=args.reps,
                                 rng=SeededRng(args.seed), horizon=args.horizon,
                                 direction=args.direction, drift=args.drift, nu=args.nu,
                                 threads=args.threads)
    _emit(result.to_json(), args.out)


def _cmd_scan(args):
    if args.calibration:
        detector = _load_calibration(args.calibration).to_config()
    else:
        if args.method is None:
            raise UsageError("--method is required unless --calibration is given")
        if args.method == Method.SHIRYAEV_BAYES.value and args.nu is None:
            raise UsageError("--nu is required for shiryaev-bayes")
        model = ShiftModel(args.df, args.c)
        if args.target_arl0 is not None:
            detector = calibrate_threshold(args.method, model, target_arl0=args.target_arl0,
                                           replications=args.reps, rng=SeededRng(args.seed),
                                           direction=args.direction, drift=args.drift,
                                           nu=args.nu, threads=args.threads).to_config()
        else:
            detector = DetectorConfig(args.method, model, args.threshold, nu=args.nu,
                                      direction=args.direction, drift=args.drift)
    try:
        alphabet = AlphabetMode.parse(args.alphabet)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    restart = RestartPolicy(True, args.skip) if args.restart == "restart" else STOP_AT_FIRST_ALARM
    config = ScanConfig(detector, block_size=args.block_size, alphabet=alphabet,
                        restart=restart, max_blocks=args.max_blocks,
                        degenerate_fallback=not args.no_fallback,
                        keep_trace=args.trace_csv is not None)
    report = scan_image(args.path, config)
    if args.trace_csv:
        _emit(write_report(report, "csv-trace"), args.trace_csv)
    log.info("%d blocks scanned, %d alarms", report.blocks_scanned, len(report.segments))
    # The trace already went to its own file.
    report.trace = None
    _emit(write_report(report, "json"), args.out)


def _cmd_evaluate_ced(args):
    cal = _load_calibration(args.calibration)
    curve = estimate_ced(cal.to_config(), range(1, args.theta_max + 1), args.reps,
                         SeededRng(args.seed), threads=args.threads)
    _emit(export_curves([curve]) if args.format == "csv" else curves_to_json([curve]), args.out)


def _cmd_evaluate_pv(args):
    cal = _load_calibration(args.calibration)
    grid = args.nu or list(DEFAULT_NU_GRID)
    curves = []
    for i, nu in enumerate(grid):
        curves.append(estimate_pv(cal.to_config(), ChangePointPrior(nu), range(1, args.t_max + 1),
                                  args.reps, SeededRng(args.seed, i), threads=args.threads))
    _emit(export_curves(curves) if args.format == "csv" else curves_to_json(curves), args.out)


def _cmd_simulate(args):
    us = gen_stream(ShiftModel(args.df, args.c), args.theta, args.length, SeededRng(args.seed))
    lines = ["t,u"] + [f"{t},{u!r}" for t, u in enumerate(us.tolist(), start=1)]
    _emit("\n".join(lines) + "\n", args.out)


COMMANDS = {
    "scan": _cmd_scan,
    "calibrate": _cmd_calibrate,
    "evaluate-ced": _cmd_evaluate_ced,
    "evaluate-pv": _cmd_evaluate_pv,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cryptosieve: error: {exc}", file=sys.stderr)
        return 1
    except (SieveError, OSError, ValueError) as exc:
        print(f"cryptosieve: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
