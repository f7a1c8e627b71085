# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Forward algorithm for an InCH process conditioned on its potential switches.

The hidden chain lives on the merged grid of observation and
potential-switch times. Segment ``k`` is ``(tau_k, tau_k+1)``; it emits
``x(tau_k+1)`` under the state occupying it, and the state then moves by
``uniform_transition_probs`` at a potential switch or stays put at an
observation.
"""

from __future__ import annotations

import dataclasses
import itertools
from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

from .constants import BRUTE_FORCE_GUARD
from .errors import NumericalUnderflow, PreconditionViolation, TooLarge
from .model import ModelSpec, uniform_transition_probs
from .track import ObservationTrack
from .uniformization import SwitchSet

OBSERVATION = "observation"
POTENTIAL_SWITCH = "potential"


def _log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def log_matmul(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """
    Matrix product of two matrices given in log space.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(left[:, :, np.newaxis] + right[np.newaxis, :, :], axis=1)


def log_vecmat(vector: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(vector[:, np.newaxis] + matrix, axis=0)


def log_matvec(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(matrix + vector[np.newaxis, :], axis=1)


def _logsumexp(values: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(logsumexp(values))


@dataclasses.dataclass(frozen=True, eq=False)
class EventGrid:
    """
    Merged observation and potential-switch times with a location at each.
    """

    times: np.ndarray
    kinds: tuple[str, ...]
    locations: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        locations = np.asarray(self.locations, dtype=float)
        kinds = tuple(self.kinds)
        if len(times) < 2 or len(kinds) != len(times) or len(locations) != len(times):
            raise PreconditionViolation(
                "a grid needs at least two times, each with a kind and a location"
            )
        if kinds[0] != OBSERVATION or kinds[-1] != OBSERVATION:
            raise PreconditionViolation("a grid must start and end with observations")
        if np.any(np.diff(times) <= 0):
            raise PreconditionViolation("grid times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "locations", locations)

    @classmethod
    def from_track(cls, track: ObservationTrack, switches: SwitchSet) -> EventGrid:
        """
        Merge a track with heterogeneous-mode switches and their locations.
        """
        if switches.locations is None:
            raise PreconditionViolation("grid construction needs switch locations")
        switches.validate(track)
        times = [track.times[:1]]
        kinds = [OBSERVATION]
        locations = [track.locations[:1]]
        for c in range(track.n_intervals):
            times.append(switches.times[c])
            kinds.extend([POTENTIAL_SWITCH] * len(switches.times[c]))
            locations.append(switches.locations[c])
            times.append(track.times[c + 1 : c + 2])
            kinds.append(OBSERVATION)
            locations.append(track.locations[c + 1 : c + 2])
        return cls(np.concatenate(times), tuple(kinds), np.concatenate(locations))

    @property
    def n_segments(self) -> int:
        return len(self.times) - 1


def _grid_terms(
    grid: EventGrid, model: ModelSpec, kappa: float
) -> tuple[np.ndarray, list[np.ndarray | None]]:
    """
    Log emissions per segment and log transition matrices after each
    segment; ``None`` marks the identity at an observation.
    """
    n_segments = grid.n_segments
    emissions = np.empty((n_segments, model.n))
    transitions: list[np.ndarray | None] = []
    for k in range(n_segments):
        x0 = grid.locations[k]
        x1 = grid.locations[k + 1]
        dt = grid.times[k + 1] - grid.times[k]
        for i, kernel in enumerate(model.kernels):
            emissions[k, i] = kernel.log_density(x0, x1, dt)
        if grid.kinds[k + 1] == POTENTIAL_SWITCH:
            transitions.append(
                _log(
                    uniform_transition_probs(
                        model, kappa, grid.times[k + 1], grid.locations[k + 1]
                    )
                )
            )
        else:
            transitions.append(None)
    return emissions, transitions


def _forward(
    log_initial: np.ndarray,
    emissions: np.ndarray,
    transitions: Sequence[np.ndarray | None],
) -> list[np.ndarray]:
    alphas = [log_initial]
    for k, transition in enumerate(transitions):
        alpha = alphas[-1] + emissions[k]
        if transition is not None:
            alpha = log_vecmat(alpha, transition)
        alphas.append(alpha)
    return alphas


def _backward(
    emissions: np.ndarray, transitions: Sequence[np.ndarray | None]
) -> list[np.ndarray]:
    betas = [np.zeros(emissions.shape[1])]
    for k in range(len(transitions) - 1, -1, -1):
        beta = betas[-1]
        if transitions[k] is not None:
            beta = log_matvec(transitions[k], beta)
        betas.append(emissions[k] + beta)
    betas.reverse()
    return betas


def _checked(value: float) -> float:
    if not np.isfinite(value):
        raise NumericalUnderflow("every state sequence has zero density")
    return value


def forward_loglik(grid: EventGrid, model: ModelSpec, kappa: float) -> float:
    """
    Log likelihood of the grid locations with all behavioural states summed out.

    :raises NumericalUnderflow: every state sequence has zero density
    """
    emissions, transitions = _grid_terms(grid, model, kappa)
    alphas = _forward(model.log_initial, emissions, transitions)
    return _checked(_logsumexp(alphas[-1]))


def brute_force_loglik(grid: EventGrid, model: ModelSpec, kappa: float) -> float:
    """
    Same quantity as :func:`forward_loglik` by explicit enumeration of all
    ``n ** K`` state sequences over the grid's segments.

    :raises TooLarge: more than ``BRUTE_FORCE_GUARD`` sequences
    """
    n_segments = grid.n_segments
    if model.n**n_segments > BRUTE_FORCE_GUARD:
        raise TooLarge(
            "{0}^{1} state sequences exceed the enumeration guard of {2}".format(
                model.n, n_segments, BRUTE_FORCE_GUARD
            )
        )
    emissions, transitions = _grid_terms(grid, model, kappa)
    sequences = np.array(
        list(itertools.product(range(model.n), repeat=n_segments)), dtype=int
    ).reshape(-1, n_segments)
    scores = model.log_initial[sequences[:, 0]]
    for k in range(n_segments):
        scores = scores + emissions[k, sequences[:, k]]
        transition = transitions[k]
        if k + 1 < n_segments:
            if transition is None:
                with np.errstate(invalid="ignore"):
                    scores = np.where(
                        sequences[:, k] == sequences[:, k + 1], scores, -np.inf
                    )
            else:
                scores = scores + transition[sequences[:, k], sequences[:, k + 1]]
    return _checked(_logsumexp(scores))


def forward_messages(
    grid: EventGrid, model: ModelSpec, kappa: float
) -> list[np.ndarray]:
    """
    Log forward messages ``alpha_0 .. alpha_K``: ``alpha_k(i)`` is the log
    joint density of ``x(tau_0) .. x(tau_k)`` and state ``i`` on segment ``k``.
    """
    emissions, transitions = _grid_terms(grid, model, kappa)
    return _forward(model.log_initial, emissions, transitions)


def backward_messages(
    grid: EventGrid, model: ModelSpec, kappa: float
) -> list[np.ndarray]:
    """
    Log backward messages ``beta_0 .. beta_K`` with ``beta_K = 0``.
    """
    emissions, transitions = _grid_terms(grid, model, kappa)
    return _backward(emissions, transitions)


def posterior_state_probs(
    grid: EventGrid, model: ModelSpec, kappa: float
) -> np.ndarray:
    """
    Smoothed probability of each state on each segment, shape ``(K, n)``.
    """
    emissions, transitions = _grid_terms(grid, model, kappa)
    alphas = _forward(model.log_initial, emissions, transitions)
    betas = _backward(emissions, transitions)
    joint = np.array(alphas[:-1]) + np.array(betas[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))


def log_transfer_matrix(
    model: ModelSpec,
    kappa: float,
    times: np.ndarray,
    locations: np.ndarray,
) -> np.ndarray:
    """
    Log transfer matrix across one observation interval.

    ``times`` and ``locations`` run from the opening observation through the
    interval's potential switches to the closing observation. Entry ``(i, j)``
    is the log density of the interior and closing locations jointly with the
    interval starting in state ``i`` and ending in state ``j``.
    """
    result = None
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        emission = np.array(
            [kernel.log_density(locations[k], locations[k + 1], dt) for kernel in model.kernels]
        )
        if k + 2 < len(times):
            step = emission[:, np.newaxis] + _log(
                uniform_transition_probs(model, kappa, times[k + 1], locations[k + 1])
            )
        else:
            step = np.full((model.n, model.n), -np.inf)
            np.fill_diagonal(step, emission)
        result = step if result is None else log_matmul(result, step)
    if result is None:
        raise PreconditionViolation("an interval needs two endpoint times")
    return result


def chain_forward(
    log_initial: np.ndarray, log_matrices: Sequence[np.ndarray]
) -> list[np.ndarray]:
    """
    Forward messages over observations: ``alpha_c+1 = alpha_c (x) M_c``.
    """
    alphas = [np.asarray(log_initial, dtype=float)]
    for matrix in log_matrices:
        alphas.append(log_vecmat(alphas[-1], matrix))
    return alphas


def chain_backward(log_matrices: Sequence[np.ndarray]) -> list[np.ndarray]:
    """
    Backward messages over observations, ending with a zero vector.
    """
    if not log_matrices:
        return []
    betas = [np.zeros(log_matrices[0].shape[0])]
    for matrix in reversed(log_matrices):
        betas.append(log_matvec(matrix, betas[-1]))
    betas.reverse()
    return betas


def chain_block_loglik(
    alpha: np.ndarray, log_matrices: Sequence[np.ndarray], beta: np.ndarray
) -> float:
    """
    Log likelihood with a block of transfer matrices swapped in between
    cached messages.
    """
    vector = alpha
    for matrix in log_matrices:
        vector = log_vecmat(vector, matrix)
    return _logsumexp(vector + beta)


def chain_loglik(log_initial: np.ndarray, log_matrices: Sequence[np.ndarray]) -> float:
    return _logsumexp(chain_forward(log_initial, log_matrices)[-1])
