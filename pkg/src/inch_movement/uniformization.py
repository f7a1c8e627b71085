# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Uniformization: the rate-kappa Poisson process of potential switches and
exact simulation of InCH paths by dynamic thinning.
"""

from __future__ import annotations

import dataclasses
import os
from collections.abc import Sequence

import numpy as np
import pandas as pd

from .errors import PreconditionViolation, UnboundedPrior
from .model import ModelSpec
from .track import ObservationTrack, coordinate_columns

EVENT_KINDS = ("start", "potential", "switch", "observation", "end")


@dataclasses.dataclass(frozen=True, eq=False)
class SwitchSet:
    """
    Potential switching times per observation interval, with their
    locations in the spatially heterogeneous case.

    Instances are never mutated; :meth:`replace` returns a new set sharing
    the untouched intervals.
    """

    times: tuple[np.ndarray, ...]
    locations: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "times", tuple(np.asarray(t, dtype=float) for t in self.times)
        )
        if self.locations is not None:
            locations = tuple(np.asarray(x, dtype=float) for x in self.locations)
            if len(locations) != len(self.times):
                raise PreconditionViolation(
                    "locations must be given for every interval"
                )
            object.__setattr__(self, "locations", locations)

    @classmethod
    def empty(cls, n_intervals: int, dim: int | None = None) -> SwitchSet:
        times = tuple(np.empty(0) for _ in range(n_intervals))
        if dim is None:
            return cls(times)
        return cls(times, tuple(np.empty((0, dim)) for _ in range(n_intervals)))

    @classmethod
    def sample(
        cls, track: ObservationTrack, kappa: float, rng: np.random.Generator
    ) -> SwitchSet:
        """
        Draw every interval's times from the Poisson-process prior.
        """
        return cls(
            tuple(
                sample_potential_switches(*track.interval(c), kappa, rng)
                for c in range(track.n_intervals)
            )
        )

    @property
    def n_intervals(self) -> int:
        return len(self.times)

    @property
    def heterogeneous(self) -> bool:
        return self.locations is not None

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(t) for t in self.times], dtype=int)

    @property
    def total(self) -> int:
        return int(sum(len(t) for t in self.times))

    def replace(
        self,
        start: int,
        times: Sequence[np.ndarray],
        locations: Sequence[np.ndarray] | None = None,
    ) -> SwitchSet:
        """
        Copy with intervals ``start .. start + len(times) - 1`` replaced.
        """
        stop = start + len(times)
        if start < 0 or stop > self.n_intervals:
            raise PreconditionViolation(
                "block {0}..{1} outside 0..{2}".format(start, stop, self.n_intervals)
            )
        new_times = self.times[:start] + tuple(times) + self.times[stop:]
        if self.locations is None:
            if locations is not None:
                raise PreconditionViolation("switch set has no locations")
            return SwitchSet(new_times)
        if locations is None or len(locations) != len(times):
            raise PreconditionViolation("replacement needs one location array per interval")
        new_locations = self.locations[:start] + tuple(locations) + self.locations[stop:]
        return SwitchSet(new_times, new_locations)

    def validate(self, track: ObservationTrack) -> None:
        """
        Check ordering, bracketing and location counts against ``track``.
        """
        if self.n_intervals != track.n_intervals:
            raise PreconditionViolation(
                "switch set has {0} intervals, track {1}".format(
                    self.n_intervals, track.n_intervals
                )
            )
        for c, times in enumerate(self.times):
            t0, t1 = track.interval(c)
            if len(times) and (
                times[0] <= t0 or times[-1] >= t1 or np.any(np.diff(times) <= 0)
            ):
                raise PreconditionViolation(
                    "interval {0}: times must increase strictly inside ({1!r}, {2!r})".format(
                        c, t0, t1
                    )
                )
            if self.locations is not None and self.locations[c].shape != (
                len(times),
                track.dim,
            ):
                raise PreconditionViolation(
                    "interval {0}: expected {1} locations".format(c, len(times))
                )


@dataclasses.dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Simulated path: event times, the state after each event and the
    location at each event.
    """

    times: np.ndarray
    states: np.ndarray
    locations: np.ndarray
    kinds: tuple[str, ...]
    n_states: int

    def observations(self, time_unit: str = "minutes") -> ObservationTrack:
        """
        Observation events as a track.
        """
        mask = np.array([kind == "observation" for kind in self.kinds], dtype=bool)
        return ObservationTrack(self.times[mask], self.locations[mask], time_unit)

    def occupancy(self) -> np.ndarray:
        """
        Time spent in each state, keyed by state index.
        """
        durations = np.diff(self.times)
        return np.bincount(self.states[:-1], weights=durations, minlength=self.n_states)

    def switch_times(self) -> np.ndarray:
        return self.times[np.array([kind == "switch" for kind in self.kinds], dtype=bool)]


def choose_kappa(model: ModelSpec) -> float:
    """
    Smallest uniformization rate valid under the prior bounds:
    the largest row sum of ``u_ij`` over ``j != i``.

    :raises UnboundedPrior: some bound is infinite
    """
    bounds = np.array(model.rates.bounds, dtype=float)
    np.fill_diagonal(bounds, 0.0)
    if not np.all(np.isfinite(bounds)):
        raise UnboundedPrior("every rate bound u_ij must be finite")
    return float(bounds.sum(axis=1).max())


def sample_potential_switches(
    t0: float, t1: float, kappa: float, rng: np.random.Generator
) -> np.ndarray:
    """
    Poisson(kappa * (t1 - t0)) many uniform times on ``(t0, t1)``, sorted.
    """
    if not t1 > t0:
        raise PreconditionViolation("need t1 > t0, got ({0!r}, {1!r})".format(t0, t1))
    if kappa < 0:
        raise PreconditionViolation("kappa must be non-negative")
    count = rng.poisson(kappa * (t1 - t0))
    times = np.sort(rng.uniform(t0, t1, size=count))
    # Endpoints have probability zero but uniform() may round onto t0.
    return times[(times > t0) & (times < t1)]


def poisson_process_log_density(count: int, duration: float, kappa: float) -> float:
    """
    Log density of ``count`` ordered potential-switch times on an interval of
    length ``duration``: the Poisson mass times the order-statistics density,
    which simplifies to ``count * log(kappa) - kappa * duration``.
    """
    if count == 0:
        return -kappa * duration
    return count * float(np.log(kappa)) - kappa * duration


def simulate(
    model: ModelSpec,
    z0: tuple[int, np.ndarray],
    t0: float,
    t1: float,
    kappa: float,
    rng: np.random.Generator,
    observation_times: Sequence[float] | None = None,
) -> Trajectory:
    """
    Exact draw of the state and location process on ``[t0, t1]``.

    Between events the location follows the current state's kernel. At each
    event of a rate-kappa Poisson process the state moves to ``j`` with
    probability ``lambda_ij / kappa``. ``observation_times`` inside
    ``[t0, t1]`` are recorded as observation events.

    :raises PreconditionViolation: a retention probability leaves ``[0, 1]``
    """
    state, location = z0
    state = int(state)
    x = np.asarray(location, dtype=float).copy()
    if not 0 <= state < model.n:
        raise PreconditionViolation("initial state {0} outside 0..{1}".format(state, model.n - 1))
    if x.shape != (model.dim,):
        raise PreconditionViolation("initial location must have {0} coordinates".format(model.dim))
    if not t1 > t0:
        raise PreconditionViolation("need t1 > t0")

    if observation_times is None:
        observation_times = []
    observations = np.sort(np.asarray(observation_times, dtype=float))
    observations = observations[(observations >= t0) & (observations <= t1)]

    times = [t0]
    states = [state]
    locations = [x.copy()]
    kinds = ["start"]

    def draw_gap() -> float:
        return rng.exponential(1.0 / kappa) if kappa > 0 else np.inf

    t = t0
    next_potential = t + draw_gap()
    next_obs = 0
    while True:
        obs_time = observations[next_obs] if next_obs < len(observations) else np.inf
        # Ties go to the potential event.
        if next_potential <= min(obs_time, t1):
            kind = "potential"
            target = next_potential
        elif obs_time <= t1:
            kind = "observation"
            target = obs_time
        else:
            kind = "end"
            target = t1
        if target > t:
            x = model.kernels[state].sample(x, target - t, rng)
        t = target
        if kind == "potential":
            row = model.rates.matrix(t, x)[state] / kappa
            stay = 1.0 - row.sum()
            if np.any(row < 0) or stay < -1e-12:
                raise PreconditionViolation(
                    "retention probability outside [0, 1] at t={0!r}; kappa too small".format(t)
                )
            probs = row.copy()
            probs[state] = max(stay, 0.0)
            cumulative = np.cumsum(probs)
            draw = rng.random() * cumulative[-1]
            new_state = int(np.searchsorted(cumulative, draw, side="right"))
            new_state = min(new_state, model.n - 1)
            if new_state != state:
                kind = "switch"
            state = new_state
            next_potential = t + draw_gap()
        elif kind == "observation":
            next_obs += 1
        times.append(t)
        states.append(state)
        locations.append(x.copy())
        kinds.append(kind)
        if kind == "end":
            break

    return Trajectory(
        np.array(times),
        np.array(states, dtype=int),
        np.array(locations),
        tuple(kinds),
        model.n,
    )


def observation_schedule(
    n_obs: int,
    interval_choices: Sequence[float],
    drop_prob: float,
    rng: np.random.Generator,
    t0: float = 0.0,
) -> np.ndarray:
    """
    Irregular observation times: gaps drawn uniformly from
    ``interval_choices``, and each fix after the first lost with probability
    ``drop_prob``, until ``n_obs`` fixes are kept.
    """
    if n_obs < 2:
        raise PreconditionViolation("need at least two observations")
    if not 0 <= drop_prob < 1:
        raise PreconditionViolation("drop probability must lie in [0, 1)")
    choices = np.asarray(interval_choices, dtype=float)
    times = [float(t0)]
    t = float(t0)
    while len(times) < n_obs:
        t += float(choices[rng.integers(len(choices))])
        if rng.random() >= drop_prob:
            times.append(t)
    return np.array(times)


def simulate_track(
    model: ModelSpec,
    observation_times: Sequence[float],
    initial_state: int,
    start_location: np.ndarray,
    kappa: float,
    rng: np.random.Generator,
    time_unit: str = "minutes",
) -> tuple[ObservationTrack, Trajectory]:
    """
    Simulate a path observed at ``observation_times``.
    """
    observation_times = np.asarray(observation_times, dtype=float)
    trajectory = simulate(
        model,
        (initial_state, start_location),
        float(observation_times[0]),
        float(observation_times[-1]),
        kappa,
        rng,
        observation_times,
    )
    return trajectory.observations(time_unit), trajectory


def write_trajectory_csv(path: str | os.PathLike, trajectory: Trajectory) -> None:
    """
    Write ``time,state,x..,event_kind`` with 1-based states.
    """
    frame = pd.DataFrame(
        trajectory.locations, columns=coordinate_columns(trajectory.locations.shape[1])
    )
    frame.insert(0, "time", trajectory.times)
    frame.insert(1, "state", trajectory.states + 1)
    frame["event_kind"] = list(trajectory.kinds)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
