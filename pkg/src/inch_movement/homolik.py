# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Spatially homogeneous likelihood with switch locations integrated out.

For every observation interval the matrix ``f_ij`` sums, over all interior
state sequences, the probability of the sequence under the uniformized
chain times the Gaussian density of the displacement along it.
"""

from __future__ import annotations

import dataclasses
import itertools
from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

from .constants import DEFAULT_SEQUENCE_GUARD
from .errors import PreconditionViolation, SequenceLengthMismatch, TooManySwitches
from .forward import chain_loglik
from .model import GaussianTransition, ModelSpec, MovementKernel, uniform_transition_probs
from .track import ObservationTrack
from .uniformization import SwitchSet

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclasses.dataclass(frozen=True, eq=False)
class IntervalKernelMatrix:
    """
    ``log f_ij`` for one observation interval; ``-inf`` marks a zero entry.
    """

    log_values: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)


def weighted_variance(
    speeds: Sequence[float],
    i: int,
    j: int,
    sequence: Sequence[int],
    t_c: float,
    switch_times: Sequence[float],
    t_next: float,
) -> float:
    """
    Displacement variance per coordinate when moving in state ``i``, then
    through ``sequence`` at the switch times, and finally in state ``j``.

    :raises SequenceLengthMismatch: ``len(sequence) != len(switch_times) - 1``
    """
    switch_times = np.asarray(switch_times, dtype=float)
    if len(switch_times) == 0 or len(sequence) != len(switch_times) - 1:
        raise SequenceLengthMismatch(
            "{0} switches need {1} interior states, got {2}".format(
                len(switch_times), len(switch_times) - 1, len(sequence)
            )
        )
    speeds = np.asarray(speeds, dtype=float)
    durations = np.diff(np.concatenate(([t_c], switch_times, [t_next])))
    states = np.concatenate(([i], np.asarray(sequence, dtype=int), [j])).astype(int)
    return float(durations @ speeds[states])


def compose_gaussian(
    segments: Sequence[tuple[MovementKernel, float]]
) -> GaussianTransition:
    """
    Exact transition law over consecutive segments, each moving under its
    own kernel for its own duration.
    """
    if not segments:
        raise PreconditionViolation("nothing to compose")
    kernel, dt = segments[0]
    result = kernel.transition(dt)
    for kernel, dt in segments[1:]:
        result = result.then(kernel.transition(dt))
    return result


def _brownian_log_density(
    variance: np.ndarray, squared_distance: float, dim: int
) -> np.ndarray:
    return -0.5 * dim * (_LOG_2PI + np.log(variance)) - 0.5 * squared_distance / variance


def _brownian_kernel(
    speeds: np.ndarray,
    log_probs: list[np.ndarray],
    durations: np.ndarray,
    squared_distance: float,
    dim: int,
) -> np.ndarray:
    n = len(speeds)
    n_switches = len(log_probs)
    if n_switches == 1:
        variance = durations[0] * speeds[:, np.newaxis] + durations[1] * speeds
        return log_probs[0] + _brownian_log_density(variance, squared_distance, dim)
    # Prefixes over (start state, interior sequence) in odometer order.
    prefix_logp = log_probs[0]
    prefix_var = durations[0] * speeds[:, np.newaxis] + durations[1] * speeds
    last = np.arange(n)
    for level in range(1, n_switches - 1):
        prefix_logp = (
            prefix_logp[:, :, np.newaxis] + log_probs[level][last][np.newaxis]
        ).reshape(n, -1)
        prefix_var = (
            prefix_var[:, :, np.newaxis] + durations[level + 1] * speeds
        ).reshape(n, -1)
        last = np.tile(np.arange(n), len(last))
    terms = prefix_logp[:, :, np.newaxis] + log_probs[-1][last][np.newaxis]
    variance = prefix_var[:, :, np.newaxis] + durations[-1] * speeds
    terms = terms + _brownian_log_density(variance, squared_distance, dim)
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(terms, axis=1)


def _general_kernel(
    model: ModelSpec,
    log_probs: list[np.ndarray],
    durations: np.ndarray,
    x_c: np.ndarray,
    x_next: np.ndarray,
) -> np.ndarray:
    n = model.n
    laws = [[kernel.transition(dt) for dt in durations] for kernel in model.kernels]
    n_switches = len(log_probs)
    result = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(n):
            terms = []
            for interior in itertools.product(range(n), repeat=n_switches - 1):
                states = (i,) + interior + (j,)
                log_pi = sum(
                    log_probs[k][states[k], states[k + 1]] for k in range(n_switches)
                )
                if log_pi == -np.inf:
                    continue
                law = laws[i][0]
                for k in range(1, n_switches + 1):
                    law = law.then(laws[states[k]][k])
                terms.append(log_pi + law.log_density(x_c, x_next))
            if terms:
                result[i, j] = logsumexp(terms)
    return result


def interval_kernel(
    model: ModelSpec,
    kappa: float,
    x_c: np.ndarray,
    x_next: np.ndarray,
    t_c: float,
    switch_times: Sequence[float],
    t_next: float,
    guard: int = DEFAULT_SEQUENCE_GUARD,
) -> IntervalKernelMatrix:
    """
    ``f_ij`` matrix of one interval given its potential switch times.

    :raises TooManySwitches: ``n ** (M - 1)`` exceeds ``guard``
    """
    if not model.rates.homogeneous:
        raise PreconditionViolation("interval kernels need spatially homogeneous rates")
    x_c = np.asarray(x_c, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    switch_times = np.asarray(switch_times, dtype=float)
    n = model.n
    n_switches = len(switch_times)
    durations = np.diff(np.concatenate(([t_c], switch_times, [t_next])))

    if n_switches == 0:
        log_values = np.full((n, n), -np.inf)
        np.fill_diagonal(
            log_values,
            [kernel.log_density(x_c, x_next, durations[0]) for kernel in model.kernels],
        )
        return IntervalKernelMatrix(log_values)

    if n ** (n_switches - 1) > guard:
        raise TooManySwitches(n_switches, guard)

    with np.errstate(divide="ignore"):
        log_probs = [
            np.log(uniform_transition_probs(model, kappa, t, None)) for t in switch_times
        ]
    speeds = model.speeds
    if speeds is not None:
        delta = x_next - x_c
        log_values = _brownian_kernel(
            speeds, log_probs, durations, float(delta @ delta), model.dim
        )
    else:
        log_values = _general_kernel(model, log_probs, durations, x_c, x_next)
    return IntervalKernelMatrix(log_values)


def interval_kernels(
    track: ObservationTrack,
    switches: SwitchSet,
    model: ModelSpec,
    kappa: float,
    guard: int = DEFAULT_SEQUENCE_GUARD,
    intervals: Sequence[int] | None = None,
) -> list[np.ndarray]:
    """
    Log ``f_ij`` matrices for the given intervals (all by default).

    A :class:`TooManySwitches` error carries the offending interval index.
    """
    if intervals is None:
        intervals = range(track.n_intervals)
    result = []
    for c in intervals:
        t_c, t_next = track.interval(c)
        try:
            matrix = interval_kernel(
                model,
                kappa,
                track.locations[c],
                track.locations[c + 1],
                t_c,
                switches.times[c],
                t_next,
                guard,
            )
        except TooManySwitches as exc:
            raise TooManySwitches(exc.count, guard, interval=c) from exc
        result.append(matrix.log_values)
    return result


def hom_forward_loglik(
    track: ObservationTrack,
    switches: SwitchSet,
    model: ModelSpec,
    kappa: float,
    guard: int = DEFAULT_SEQUENCE_GUARD,
) -> float:
    """
    Log likelihood of the track given the potential switch times, with both
    the states and the switch locations integrated out.
    """
    return chain_loglik(
        model.log_initial, interval_kernels(track, switches, model, kappa, guard)
    )
