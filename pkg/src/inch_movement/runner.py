# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Running configured chains: single fits, grid-search tuning and benchmarks.
"""

from __future__ import annotations

import dataclasses
import itertools
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import Any

from .config import RunConfig
from .diagnostics import EfficiencyReport, efficiency_report
from .logger import LOGGER
from .mcmc import ChainRun, Priors, Tuning, sample_chain
from .model import ModelSpec
from .track import ObservationTrack


@dataclasses.dataclass(frozen=True, eq=False)
class FitResult:
    """
    A chain together with its efficiency report.
    """

    run: ChainRun
    report: EfficiencyReport


def tuning_from_config(config: RunConfig, **overrides: Any) -> Tuning:
    values = dict(config.tuning.values)
    values.update(overrides)
    return Tuning(**values)


def priors_from_config(config: RunConfig) -> Priors:
    return Priors(speed_max=config.priors.speed_max)


def fit(
    config: RunConfig,
    track: ObservationTrack,
    *,
    model: ModelSpec | None = None,
    sampler: str | None = None,
    seed: int | None = None,
    tuning: Tuning | None = None,
    iterations: int | None = None,
) -> FitResult:
    """
    Run one chain as configured in ``config.run``; keyword arguments override
    the configured values.
    """
    if model is None:
        model = config.model.build()
    settings = config.run
    sampler = sampler or settings.sampler
    iterations = settings.iterations if iterations is None else iterations
    settings.check_draws(iterations)
    burn_in = settings.burn_in_for(iterations)
    chain = sample_chain(
        model,
        track,
        tuning or tuning_from_config(config),
        priors_from_config(config),
        iterations,
        burn_in,
        settings.thin,
        settings.seed if seed is None else seed,
        sampler=sampler,
        kappa=config.resolve_kappa(model),
        guard=settings.guard,
        record_timing=settings.record_timing,
        debug=settings.debug,
        log_every=settings.log_every,
    )
    report = efficiency_report(
        chain.samples,
        chain.wall_time,
        iterations=chain.iterations,
        thin=chain.thin,
        sampler=chain.sampler,
        acceptance=chain.acceptance,
    )
    return FitResult(chain, report)


@dataclasses.dataclass(frozen=True)
class GridPoint:
    """
    One evaluated tuning candidate.
    """

    overrides: dict[str, Any]
    report: EfficiencyReport


def grid_candidates(grid: dict[str, list[Any]]) -> list[dict[str, Any]]:
    """
    All combinations of the grid's candidate values, in key order.
    """
    keys = sorted(grid)
    return [
        dict(zip(keys, values))
        for values in itertools.product(*(grid[key] for key in keys))
    ]


def grid_search(
    config: RunConfig,
    track: ObservationTrack,
    *,
    sampler: str | None = None,
    seed: int | None = None,
    iterations: int | None = None,
) -> tuple[Tuning, list[GridPoint]]:
    """
    Run a short chain for every combination in ``config.tuning_grid`` and
    return the tuning with the highest efficiency (first wins on ties).
    """
    model = config.model.build()
    points = []
    best: tuple[float, Tuning] | None = None
    for overrides in grid_candidates(config.tuning_grid):
        tuning = tuning_from_config(config, **overrides)
        result = fit(
            config,
            track,
            model=model,
            sampler=sampler,
            seed=seed,
            tuning=tuning,
            iterations=iterations,
        )
        points.append(GridPoint(overrides, result.report))
        LOGGER.info(
            "tuning {}: efficiency {:.6g}",
            ", ".join("{0}={1}".format(key, value) for key, value in overrides.items()),
            result.report.efficiency,
        )
        if best is None or result.report.efficiency > best[0]:
            best = (result.report.efficiency, tuning)
    assert best is not None
    return best[1], points


def _fit_worker(
    config: dict, track: ObservationTrack, sampler: str, seed: int | None
) -> FitResult:
    return fit(RunConfig(config), track, sampler=sampler, seed=seed)


def benchmark(
    config: RunConfig,
    track: ObservationTrack,
    samplers: Sequence[str],
    *,
    seed: int | None = None,
    jobs: int = 1,
) -> dict[str, FitResult]:
    """
    Fit every sampler to the same track from the same seed.

    With ``jobs > 1`` the chains run in separate processes; results are
    keyed and ordered by sampler as given.
    """
    if jobs > 1 and len(samplers) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [
                executor.submit(_fit_worker, config.config, track, sampler, seed)
                for sampler in samplers
            ]
            return {
                sampler: future.result() for sampler, future in zip(samplers, futures)
            }
    return {sampler: fit(config, track, sampler=sampler, seed=seed) for sampler in samplers}
