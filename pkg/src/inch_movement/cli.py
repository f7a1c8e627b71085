# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

# PYTHON_ARGCOMPLETE_OK

"""
Entrypoint to the inch-movement script.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import traceback
from typing import Any, cast

import numpy as np

try:
    import argcomplete

    HAS_ARGCOMPLETE = True
except ImportError:
    HAS_ARGCOMPLETE = False

from . import __version__ as _version
from . import constants as C
from .config import SAMPLERS, RunConfig
from .errors import GuardBreach, InchError, ValidationError
from .logger import LOGGER, setup_logger
from .report import render_comparison, render_efficiency_report
from .runner import FitResult, benchmark, fit, grid_search
from .samples import write_samples_csv
from .track import ingest_csv, write_track_csv
from .uniformization import observation_schedule, simulate_track, write_trajectory_csv

DEFAULT_CONFIG_PATH = "inch.yaml"


def create_argparser(program_name: str) -> argparse.ArgumentParser:
    """
    Create CLI argument parser.
    """
    parser = argparse.ArgumentParser(
        prog=program_name,
        description="Bayesian inference for integrated continuous-time hidden Markov"
        " movement models.",
    )
    parser.add_argument("--version", action="version", version=_version)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="increase verbosity of output",
    )

    configured = argparse.ArgumentParser(add_help=False)
    configured.add_argument(
        "--config",
        metavar="CONFIG",
        help="path to a YAML or JSON config file (default: built-in defaults)",
    )
    configured.add_argument(
        "--seed", type=int, help="random seed (default: run.seed from the config)"
    )

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument(
        "--data", metavar="TRACK_CSV", required=True, help="observation track to fit"
    )
    data.add_argument(
        "--iterations",
        type=int,
        help="number of iterations (default: run.iterations from the config)",
    )

    subparsers = parser.add_subparsers(metavar="COMMAND")

    init_parser = subparsers.add_parser(
        "init", parents=[common], help="write the default config file"
    )
    init_parser.set_defaults(func=command_init)
    init_parser.add_argument(
        "--out",
        default=DEFAULT_CONFIG_PATH,
        help="config file to create; .json writes JSON (default: %(default)s)",
    )

    simulate_parser = subparsers.add_parser(
        "simulate",
        parents=[common, configured],
        help="simulate an observed track from the configured model",
    )
    simulate_parser.set_defaults(func=command_simulate)
    simulate_parser.add_argument("--out", required=True, help="track CSV to write")
    simulate_parser.add_argument(
        "--trajectory", help="also write the full simulated trajectory to this CSV"
    )
    simulate_parser.add_argument(
        "--n-obs", type=int, help="number of observations (default: simulate.n_obs)"
    )

    fit_parser = subparsers.add_parser(
        "fit", parents=[common, configured, data], help="fit a track with one sampler"
    )
    fit_parser.set_defaults(func=command_fit)
    fit_parser.add_argument("--out", required=True, help="output directory")
    fit_parser.add_argument(
        "--sampler", choices=SAMPLERS, help="sampler (default: run.sampler)"
    )

    benchmark_parser = subparsers.add_parser(
        "benchmark",
        parents=[common, configured, data],
        help="compare the efficiency of several samplers on one track",
    )
    benchmark_parser.set_defaults(func=command_benchmark)
    benchmark_parser.add_argument("--out", required=True, help="output directory")
    benchmark_parser.add_argument(
        "--samplers",
        nargs="+",
        choices=SAMPLERS,
        default=["inch-hom", "baseline"],
        help="samplers to compare (default: %(default)s)",
    )
    benchmark_parser.add_argument(
        "--jobs", type=int, default=1, help="run samplers in parallel processes"
    )

    tune_parser = subparsers.add_parser(
        "tune",
        parents=[common, configured, data],
        help="grid-search the tuning parameters listed in tuning_grid",
    )
    tune_parser.set_defaults(func=command_tune)
    tune_parser.add_argument(
        "--out", required=True, help="config file to write with the best tuning"
    )
    tune_parser.add_argument(
        "--sampler", choices=SAMPLERS, help="sampler (default: run.sampler)"
    )

    if HAS_ARGCOMPLETE:
        argcomplete.autocomplete(parser)

    return parser


def run(args: list[str]) -> int:
    """
    Main program entry point.
    """
    verbosity = 0
    try:
        program_name = os.path.basename(args[0])
        parser = create_argparser(program_name)

        arguments = parser.parse_args(args[1:])

        if getattr(arguments, "func", None) is None:
            parser.print_help()
            return C.RC_VALIDATION_ERROR

        verbosity = arguments.verbose
        setup_logger(verbosity)

        return arguments.func(arguments)
    except ValidationError as e:
        LOGGER.error(str(e))
        if verbosity > 2:
            traceback.print_exc()
        return C.RC_VALIDATION_ERROR
    except GuardBreach as e:
        LOGGER.error(str(e))
        if verbosity > 2:
            traceback.print_exc()
        return C.RC_GUARD_BREACH
    except InchError as e:
        LOGGER.error(str(e))
        if verbosity > 2:
            traceback.print_exc()
        return C.RC_COMMAND_FAILED
    except SystemExit as e:
        # argparse exits with 2 on bad arguments, matching RC_VALIDATION_ERROR.
        return cast(int, e.code)
    except Exception:  # pylint: disable=broad-except
        if verbosity > 0:
            traceback.print_exc()
        else:
            print("ERROR: Uncaught exception. Run with -v to see traceback.")
        return C.RC_UNHANDLED_ERROR


def _load_config(args: Any) -> RunConfig:
    if args.config is None:
        return RunConfig.default()
    LOGGER.debug('Loading config from "{}"', args.config)
    return RunConfig.load(args.config)


def _with_iterations(config: RunConfig, iterations: int | None) -> RunConfig:
    if iterations is None:
        return config
    raw = copy.deepcopy(config.config)
    run_section = raw.setdefault("run", {})
    run_section["iterations"] = iterations
    run_section["burn_in"] = config.run.burn_in_for(iterations)
    return RunConfig(raw)


def _ensure_directory(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def command_init(args: Any) -> int:
    """
    Write the default configuration.

    :arg args: Parsed arguments
    """
    path: str = args.out
    LOGGER.debug('Checking for existance of "{}"', path)
    if os.path.exists(path):
        LOGGER.error('A configuration file already exists at "{}"!', path)
        return C.RC_COMMAND_FAILED

    try:
        RunConfig.default().store(path)
        print('Created config file "{0}"'.format(path))
    except Exception as exc:  # pylint: disable=broad-except
        LOGGER.error('Cannot create config file "{}"', path)
        LOGGER.info("Exception: {}", str(exc))
        return C.RC_COMMAND_FAILED

    return C.RC_SUCCESS


def command_simulate(args: Any) -> int:
    """
    Simulate a track from the model with the true parameters substituted.

    :arg args: Parsed arguments
    """
    config = _load_config(args)
    simulation = config.simulate
    model = simulation.true_model(config.model.build())
    kappa = config.resolve_kappa(model)
    seed = config.run.seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)

    times = observation_schedule(
        simulation.n_obs if args.n_obs is None else args.n_obs,
        simulation.interval_choices,
        simulation.drop_prob,
        rng,
    )
    track, trajectory = simulate_track(
        model,
        times,
        simulation.initial_state - 1,
        simulation.start(model.dim),
        kappa,
        rng,
        config.model.time_unit,
    )
    LOGGER.info(
        "simulated {} observations with {} behaviour switches",
        track.n_obs,
        len(trajectory.switch_times()),
    )
    LOGGER.info(
        "time in each state: {}",
        ", ".join(
            "{0}={1:.4g}".format(k, duration)
            for k, duration in enumerate(trajectory.occupancy(), start=1)
        ),
    )

    write_track_csv(args.out, track)
    print('Wrote track "{0}"'.format(args.out))
    if args.trajectory:
        write_trajectory_csv(args.trajectory, trajectory)
        print('Wrote trajectory "{0}"'.format(args.trajectory))
    return C.RC_SUCCESS


def _write_fit(directory: str, result: FitResult, suffix: str = "") -> None:
    write_samples_csv(os.path.join(directory, "samples{0}.csv".format(suffix)), result.run.samples)
    result.report.store(os.path.join(directory, "efficiency{0}.json".format(suffix)))


def command_fit(args: Any) -> int:
    """
    Fit a track and write samples, efficiency JSON and a report.

    :arg args: Parsed arguments
    """
    config = _with_iterations(_load_config(args), args.iterations)
    track = ingest_csv(args.data)
    result = fit(config, track, sampler=args.sampler, seed=args.seed)

    _ensure_directory(args.out)
    _write_fit(args.out, result)
    text_format = config.run.report_format
    report_path = os.path.join(args.out, "report.{0}".format(text_format.to_extension()))
    _write_text(report_path, render_efficiency_report(result.report, text_format))
    print(
        "{0}: minimum ESS {1:.4g} ({2}), written to {3}".format(
            result.run.sampler, result.report.min_ess, result.report.min_quantity, args.out
        )
    )
    return C.RC_SUCCESS


def command_benchmark(args: Any) -> int:
    """
    Run several samplers on one track and write a comparison.

    :arg args: Parsed arguments
    """
    samplers: list[str] = list(dict.fromkeys(args.samplers))
    if len(samplers) < 2:
        LOGGER.error("A benchmark needs at least two different samplers")
        return C.RC_VALIDATION_ERROR
    if args.jobs < 1:
        LOGGER.error("--jobs must be at least 1")
        return C.RC_VALIDATION_ERROR
    config = _with_iterations(_load_config(args), args.iterations)
    track = ingest_csv(args.data)
    results = benchmark(config, track, samplers, seed=args.seed, jobs=args.jobs)

    _ensure_directory(args.out)
    for sampler, result in results.items():
        _write_fit(args.out, result, "-{0}".format(sampler))
    reports = {sampler: result.report for sampler, result in results.items()}
    with open(os.path.join(args.out, "benchmark.json"), "w", encoding="utf-8") as handle:
        json.dump(
            {sampler: report.to_dict() for sampler, report in reports.items()},
            handle,
            indent=2,
            sort_keys=True,
        )
        handle.write("\n")
    text_format = config.run.report_format
    report_path = os.path.join(args.out, "benchmark.{0}".format(text_format.to_extension()))
    _write_text(report_path, render_comparison(reports, text_format))
    for sampler, report in reports.items():
        print("{0}: efficiency {1:.4g}".format(sampler, report.efficiency))
    return C.RC_SUCCESS


def command_tune(args: Any) -> int:
    """
    Grid-search tuning parameters and store the config with the best ones.

    :arg args: Parsed arguments
    """
    config = _load_config(args)
    if not config.tuning_grid:
        LOGGER.error("The config has no tuning_grid section")
        return C.RC_VALIDATION_ERROR
    track = ingest_csv(args.data)
    best, points = grid_search(
        config, track, sampler=args.sampler, seed=args.seed, iterations=args.iterations
    )
    for point in points:
        print(
            "{0}: efficiency {1:.4g}".format(
                ", ".join("{0}={1}".format(key, value) for key, value in point.overrides.items()),
                point.report.efficiency,
            )
        )

    tuned = dict(config.config)
    tuned["tuning"] = {
        key: getattr(best, key) for key in sorted(config.tuning.values)
    }
    RunConfig(tuned).store(args.out)
    print('Wrote tuned config "{0}"'.format(args.out))
    return C.RC_SUCCESS


def main() -> int:
    """
    Entrypoint called from the script.

    console_scripts call functions which take no parameters.  However, it's hard to test a function
    which takes no parameters so this function lightly wraps :func:`run`, which actually does the
    heavy lifting.

    :returns: A program return code.
    See constants.py for the return codes.
    """

    return run(sys.argv)
