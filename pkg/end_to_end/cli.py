"""
Command-line front end.

Exit status 0 on success, 2 on usage errors and 3 on data errors. Commands
that touch a state file leave it unchanged when they fail.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from benchgen.surface_builder import build_surface_with_retry, prepare_grid
from bo_loop.config import BoConfig
from bo_loop.run_log import atomic_write_text
from bo_loop.state_store import JsonFileStateStore, ask_persisted, load_optimizer, tell_persisted
from common import seeding
from common.exceptions import GaitTuneError
from common.logging_setup import configure_logging
from controller_sim.light_pattern import DEFAULT_FRAME_SIZE, DEFAULT_FREQUENCY_HZ, LightPattern, export_pattern
from controller_sim.plant import DEFAULT_DURATION_S
from end_to_end.benchmark import BenchmarkSuite, run_benchmark
from end_to_end.closed_loop_graph import CLOSED_LOOP_V_STAR, run_closed_loop
from end_to_end.report import write_report
from gp_core.hyperparams import ControllerParams
from velocity.movement_fit import DEFAULT_FREQUENCY_HZ as FIT_FREQUENCY_HZ
from velocity.movement_fit import DEFAULT_T_CUT_S, DEFAULT_V_STAR, cost_from_speed, fit_movement
from velocity.traces import read_trace_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _bench(args) -> int:
    suite = BenchmarkSuite.load(args.config)
    if args.workers is not None:
        suite = suite.model_copy(update={"workers": args.workers})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = run_benchmark(suite, out_dir=out)
    doc = write_report(report, suite, out)
    sys.stdout.write(doc.text)
    return EXIT_OK


def _fit_velocity(args) -> int:
    trace = read_trace_csv(args.trace)
    fit = fit_movement(trace, f_hz=args.f_hz, t_cut=args.t_cut)
    document = fit.model_dump(exclude={"covariance"})
    document["cost"] = cost_from_speed(fit.v_m, args.v_star)
    print(json.dumps(document, indent=2))
    return EXIT_OK


def _ask(args) -> int:
    store = JsonFileStateStore(args.state, record_wall_time=args.record_wall_time)
    config = BoConfig.load(args.config) if args.config else None
    if config is not None and store.exists():
        logger.warning("state file %s exists, ignoring --config", store.path)
    print(ask_persisted(store, config).format())
    return EXIT_OK


def _tell(args) -> int:
    store = JsonFileStateStore(args.state, record_wall_time=args.record_wall_time)
    state = tell_persisted(store, ControllerParams.parse(args.theta), args.cost)
    record = state.run_log.records[-1]
    print(f"iteration {record.iteration}: incumbent {record.incumbent_theta.format()} ({record.incumbent_mean!r})")
    return EXIT_OK


def _status(args) -> int:
    optimizer = load_optimizer(JsonFileStateStore(args.state))
    state = optimizer.state
    document = {
        "config": optimizer.config.label,
        "iteration": state.iteration,
        "budget": optimizer.config.budget,
        "phase": state.phase.value,
        "pending": state.pending.format() if state.pending else None,
        "hyperparams": state.hyperparams.to_document(),
    }
    if state.iteration:
        theta_star, mu_star = optimizer.incumbent()
        best_theta, best_cost = optimizer.best_observed()
        document["incumbent"] = {"theta": theta_star.format(), "mean": mu_star}
        document["best_observed"] = {"theta": best_theta.format(), "cost": best_cost}
    print(json.dumps(document, indent=2))
    return EXIT_OK


def _pattern(args) -> int:
    size = dict(frequency_hz=args.freq_hz, width_px=args.width, height_px=args.height)
    if args.theta:
        pattern = LightPattern.from_controller(ControllerParams.parse(args.theta), **size)
    else:
        pattern = LightPattern(wavelength_px=args.wavelength_px, duty_cycle_frac=args.duty_pct / 100.0, **size)
    export_pattern(pattern, args.t, args.out, pgm=args.pgm)
    return EXIT_OK


def _closed_loop(args) -> int:
    store = JsonFileStateStore(args.state)
    config = BoConfig.load(args.config) if args.config else None
    report = run_closed_loop(store, config=config, v_star=args.v_star, duration_s=args.duration)
    text = report.model_dump_json(indent=2) + "\n"
    if args.report:
        atomic_write_text(Path(args.report), text)
    sys.stdout.write(text)
    return EXIT_OK


def _surface(args) -> int:
    suite = BenchmarkSuite.load(args.config) if args.config else BenchmarkSuite.from_document({})
    grid = prepare_grid(suite.source_grid())
    surface = build_surface_with_retry(grid, (args.seed, args.run, seeding.STREAM_SURFACE))
    text = surface.manifest_json() + "\n"
    if args.out:
        atomic_write_text(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaittune", description="Bayesian optimization of light-field gait controllers.")
    parser.add_argument("--log-level", default="WARNING")
    commands = parser.add_subparsers(dest="command", required=True)

    bench = commands.add_parser("bench", help="run the semi-synthetic benchmark")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--workers", type=int)
    bench.set_defaults(handler=_bench)

    fit = commands.add_parser("fit-velocity", help="fit the movement model to a tracking trace")
    fit.add_argument("--trace", required=True)
    fit.add_argument("--f-hz", type=float, default=FIT_FREQUENCY_HZ)
    fit.add_argument("--t-cut", type=float, default=DEFAULT_T_CUT_S)
    fit.add_argument("--v-star", type=float, default=DEFAULT_V_STAR)
    fit.set_defaults(handler=_fit_velocity)

    ask = commands.add_parser("ask", help="propose the next controller")
    ask.add_argument("--state", required=True)
    ask.add_argument("--config", help="run config used when the state file does not exist yet")
    ask.add_argument("--record-wall-time", action="store_true", help="keep wall-clock timings in the state file")
    ask.set_defaults(handler=_ask)

    tell = commands.add_parser("tell", help="report the measured cost of the last proposal")
    tell.add_argument("--state", required=True)
    tell.add_argument("--theta", required=True, help="<wavelength_um>,<duty_pct>")
    tell.add_argument("--cost", type=float, required=True)
    tell.add_argument("--record-wall-time", action="store_true", help="keep wall-clock timings in the state file")
    tell.set_defaults(handler=_tell)

    status = commands.add_parser("status", help="summarize a state file")
    status.add_argument("--state", required=True)
    status.set_defaults(handler=_status)

    pattern = commands.add_parser("pattern", help="render one projector frame")
    pattern.add_argument("--theta", help="<wavelength_um>,<duty_pct>")
    pattern.add_argument("--wavelength-px", type=float)
    pattern.add_argument("--duty-pct", type=float)
    pattern.add_argument("--t", type=float, default=0.0, help="time in seconds")
    pattern.add_argument("--out", required=True)
    pattern.add_argument("--pgm", action="store_true", help="also write a plain-text PGM next to the packed bitmap")
    pattern.add_argument("--freq-hz", type=float, default=DEFAULT_FREQUENCY_HZ)
    pattern.add_argument("--width", type=int, default=DEFAULT_FRAME_SIZE[0])
    pattern.add_argument("--height", type=int, default=DEFAULT_FRAME_SIZE[1])
    pattern.set_defaults(handler=_pattern)

    loop = commands.add_parser("closed-loop", help="optimize the simulated plant through a state file")
    loop.add_argument("--state", required=True)
    loop.add_argument("--config")
    loop.add_argument("--v-star", type=float, default=CLOSED_LOOP_V_STAR)
    loop.add_argument("--duration", type=float, default=DEFAULT_DURATION_S)
    loop.add_argument("--report")
    loop.set_defaults(handler=_closed_loop)

    surface = commands.add_parser("surface", help="build one semi-synthetic surface and print its manifest")
    surface.add_argument("--config")
    surface.add_argument("--seed", type=int, default=0)
    surface.add_argument("--run", type=int, default=0)
    surface.add_argument("--out")
    surface.set_defaults(handler=_surface)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "pattern" and not args.theta and (args.wavelength_px is None or args.duty_pct is None):
            parser.error("pattern needs --theta or both --wavelength-px and --duty-pct")
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        configure_logging(args.log_level)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except (GaitTuneError, ValueError, OSError) as e:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
