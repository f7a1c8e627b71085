# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Comparison sampler for the spatially homogeneous Brownian case that keeps
the behavioural state after every potential switch in its state.

Label proposals are uniform over states on a contiguous window of intervals.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Sequence

import numpy as np

from .errors import CacheIncoherent, PreconditionViolation
from .logger import LOGGER
from .mcmc import ChainContext, Priors, Tuning, propose_params, proposed_model
from .model import ModelSpec, uniform_transition_probs
from .track import ObservationTrack
from .uniformization import SwitchSet, sample_potential_switches

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclasses.dataclass(frozen=True, eq=False)
class LabelledSwitchSet:
    """
    Potential switches with the state taken at each, plus the initial state.
    """

    switches: SwitchSet
    initial_state: int
    labels: tuple[np.ndarray, ...]

    def __post_init__(self):
        labels = tuple(np.asarray(label, dtype=int) for label in self.labels)
        if len(labels) != self.switches.n_intervals or any(
            len(label) != len(times) for label, times in zip(labels, self.switches.times)
        ):
            raise PreconditionViolation("every potential switch needs one label")
        object.__setattr__(self, "labels", labels)

    def validate(self, n: int) -> None:
        if not 0 <= self.initial_state < n or any(
            len(label) and (label.min() < 0 or label.max() >= n) for label in self.labels
        ):
            raise PreconditionViolation("labels must lie in 0..{0}".format(n - 1))

    def entry_states(self) -> np.ndarray:
        """
        State occupied at the start of every interval.
        """
        entries = np.empty(self.switches.n_intervals, dtype=int)
        state = self.initial_state
        for c, label in enumerate(self.labels):
            entries[c] = state
            if len(label):
                state = int(label[-1])
        return entries

    def replace(
        self,
        start: int,
        times: Sequence[np.ndarray] | None,
        labels: Sequence[np.ndarray],
        initial_state: int | None = None,
    ) -> LabelledSwitchSet:
        """
        Copy with new labels (and optionally times) from interval ``start`` on.
        """
        stop = start + len(labels)
        switches = self.switches if times is None else self.switches.replace(start, times)
        return LabelledSwitchSet(
            switches,
            self.initial_state if initial_state is None else initial_state,
            self.labels[:start] + tuple(labels) + self.labels[stop:],
        )


def _interval_contribution(
    model: ModelSpec,
    kappa: float,
    track: ObservationTrack,
    c: int,
    times: np.ndarray,
    entry: int,
    labels: np.ndarray,
    use_likelihood: bool = True,
) -> float:
    t_c, t_next = track.interval(c)
    states = np.concatenate(([entry], labels)).astype(int)
    total = 0.0
    with np.errstate(divide="ignore"):
        for k, t in enumerate(times):
            probs = uniform_transition_probs(model, kappa, t, None)
            total += float(np.log(probs[states[k], states[k + 1]]))
    if use_likelihood:
        durations = np.diff(np.concatenate(([t_c], times, [t_next])))
        variance = float(durations @ model.speeds[states])
        delta = track.locations[c + 1] - track.locations[c]
        total += -0.5 * model.dim * (_LOG_2PI + np.log(variance)) - 0.5 * float(
            delta @ delta
        ) / variance
    return total


def _contributions(
    model: ModelSpec,
    kappa: float,
    track: ObservationTrack,
    labelled: LabelledSwitchSet,
    intervals: Sequence[int],
    use_likelihood: bool = True,
) -> np.ndarray:
    entries = labelled.entry_states()
    return np.array(
        [
            _interval_contribution(
                model,
                kappa,
                track,
                c,
                labelled.switches.times[c],
                int(entries[c]),
                labelled.labels[c],
                use_likelihood,
            )
            for c in intervals
        ]
    )


def _check_model(model: ModelSpec) -> None:
    if not (model.is_brownian and model.rates.homogeneous):
        raise PreconditionViolation(
            "the baseline sampler needs Brownian kernels and homogeneous rates"
        )


def conditional_loglik(
    track: ObservationTrack,
    labelled: LabelledSwitchSet,
    model: ModelSpec,
    kappa: float,
) -> float:
    """
    Log density of the track jointly with the labelled state sequence, given
    the potential switch times.
    """
    _check_model(model)
    labelled.validate(model.n)
    contributions = _contributions(
        model, kappa, track, labelled, range(track.n_intervals)
    )
    return float(model.log_initial[labelled.initial_state] + contributions.sum())


@dataclasses.dataclass(frozen=True, eq=False)
class BaselineState:
    """
    Parameters, labelled switches and cached per-interval contributions.
    """

    model: ModelSpec
    labelled: LabelledSwitchSet
    contributions: np.ndarray
    track: ObservationTrack

    @classmethod
    def build(
        cls, model: ModelSpec, labelled: LabelledSwitchSet, context: ChainContext
    ) -> BaselineState:
        contributions = _contributions(
            model,
            context.kappa,
            context.track,
            labelled,
            range(context.track.n_intervals),
            context.use_likelihood,
        )
        return cls(model, labelled, contributions, context.track)

    @property
    def switches(self) -> SwitchSet:
        return self.labelled.switches

    @property
    def loglik(self) -> float:
        return float(
            self.model.log_initial[self.labelled.initial_state] + self.contributions.sum()
        )

    def occupancy(self) -> tuple[float, ...]:
        """
        Fraction of the track's duration spent in each state.
        """
        time_in = np.zeros(self.model.n)
        entries = self.labelled.entry_states()
        for c in range(self.track.n_intervals):
            t_c, t_next = self.track.interval(c)
            times = self.labelled.switches.times[c]
            durations = np.diff(np.concatenate(([t_c], times, [t_next])))
            states = np.concatenate(([entries[c]], self.labelled.labels[c])).astype(int)
            np.add.at(time_in, states, durations)
        return tuple(float(v) for v in time_in / time_in.sum())

    def verify_cache(self, context: ChainContext, tolerance: float = 1e-9) -> None:
        fresh = BaselineState.build(self.model, self.labelled, context)
        if not np.allclose(
            fresh.contributions, self.contributions, rtol=tolerance, atol=tolerance
        ):
            raise CacheIncoherent("cached interval contributions are stale")
        LOGGER.debug("baseline cache verified at loglik {}", self.loglik)


def initial_baseline_state(
    model: ModelSpec, context: ChainContext, rng: np.random.Generator
) -> BaselineState:
    """
    Switch times from the prior and uniform labels.
    """
    _check_model(model)
    switches = SwitchSet.sample(context.track, context.kappa, rng)
    labelled = LabelledSwitchSet(
        switches,
        int(rng.integers(model.n)),
        tuple(rng.integers(model.n, size=len(times)) for times in switches.times),
    )
    return BaselineState.build(model, labelled, context)


def _affected_stop(labelled: LabelledSwitchSet, stop: int) -> int:
    """
    End of the intervals whose contribution depends on labels before ``stop``:
    the entry state carries through empty intervals to the next switch.
    """
    n_intervals = labelled.switches.n_intervals
    c = stop
    while c < n_intervals:
        if len(labelled.switches.times[c]):
            return c + 1
        c += 1
    return n_intervals


def _window(
    n_intervals: int, tuning: Tuning, rng: np.random.Generator
) -> tuple[int, int]:
    length = max(1, int(rng.binomial(n_intervals, tuning.resample_frac)))
    start = int(rng.integers(n_intervals - length + 1))
    return start, start + length


def _accept_update(
    state: BaselineState,
    labelled: LabelledSwitchSet,
    start: int,
    stop: int,
    log_q_ratio: float,
    context: ChainContext,
    rng: np.random.Generator,
) -> tuple[BaselineState, bool]:
    stop = max(_affected_stop(labelled, stop), _affected_stop(state.labelled, stop))
    affected = range(start, stop)
    new = _contributions(
        state.model, context.kappa, context.track, labelled, affected, context.use_likelihood
    )
    old = state.contributions[affected.start : affected.stop]
    log_ratio = (
        float(new.sum() - old.sum())
        + float(
            state.model.log_initial[labelled.initial_state]
            - state.model.log_initial[state.labelled.initial_state]
        )
        + log_q_ratio
    )
    if np.log(rng.random()) < log_ratio:
        contributions = state.contributions.copy()
        contributions[affected.start : affected.stop] = new
        return BaselineState(state.model, labelled, contributions, state.track), True
    return state, False


def mh_step_baseline(
    state: BaselineState,
    tuning: Tuning,
    context: ChainContext,
    rng: np.random.Generator,
) -> tuple[BaselineState, bool]:
    """
    Redraw switch times from the prior and labels uniformly on a window.

    Only intervals whose contribution can change are recomputed.
    """
    track = context.track
    n = state.model.n
    start, stop = _window(track.n_intervals, tuning, rng)
    times = [
        sample_potential_switches(*track.interval(c), context.kappa, rng)
        for c in range(start, stop)
    ]
    labels = [rng.integers(n, size=len(interval_times)) for interval_times in times]
    labelled = state.labelled.replace(start, times, labels)
    old_count = sum(len(t) for t in state.switches.times[start:stop])
    new_count = sum(len(t) for t in times)
    return _accept_update(
        state, labelled, start, stop, (new_count - old_count) * np.log(n), context, rng
    )


def mh_step_relabel(
    state: BaselineState,
    tuning: Tuning,
    context: ChainContext,
    rng: np.random.Generator,
) -> tuple[BaselineState, bool]:
    """
    Redraw labels uniformly on a window, keeping the switch times; a window
    at the start of the track also redraws the initial state.
    """
    n = state.model.n
    start, stop = _window(context.track.n_intervals, tuning, rng)
    labels = [rng.integers(n, size=len(times)) for times in state.switches.times[start:stop]]
    initial_state = int(rng.integers(n)) if start == 0 else None
    labelled = state.labelled.replace(start, None, labels, initial_state)
    return _accept_update(state, labelled, start, stop, 0.0, context, rng)


def mh_step_baseline_params(
    state: BaselineState,
    tuning: Tuning,
    priors: Priors,
    context: ChainContext,
    rng: np.random.Generator,
) -> tuple[BaselineState, bool]:
    """
    Speed and rate update of the baseline sampler.
    """
    proposal = propose_params(state.model, tuning, rng)
    threshold = np.log(rng.random())
    if not priors.admits(
        proposal.speeds, proposal.rate_params, state.model.rates.param_bounds
    ):
        return state, False
    candidate = BaselineState.build(
        proposed_model(state.model, proposal), state.labelled, context
    )
    if threshold < candidate.loglik - state.loglik + proposal.log_jacobian:
        return candidate, True
    return state, False
