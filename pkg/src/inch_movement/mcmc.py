# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Metropolis-Hastings samplers for InCH processes.

Both samplers keep potential switching times as part of the chain state and
integrate the behavioural states out with forward messages over
observation intervals. The heterogeneous sampler also keeps the locations at
potential switches; the homogeneous one integrates them out as well.
"""

from __future__ import annotations

import dataclasses
import functools
import time
from collections.abc import Callable, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .constants import DEFAULT_SEQUENCE_GUARD
from .errors import (
    CacheIncoherent,
    ConfigError,
    DegenerateCovariance,
    GuardBreach,
    PreconditionViolation,
    TooManySwitches,
    UnboundedPrior,
)
from .forward import (
    chain_backward,
    chain_block_loglik,
    chain_forward,
    log_matvec,
    log_transfer_matrix,
    log_vecmat,
)
from .homolik import interval_kernels
from .logger import LOGGER
from .model import ModelSpec
from .samples import SampleRecord
from .track import ObservationTrack
from .uniformization import (
    SwitchSet,
    choose_kappa,
    poisson_process_log_density,
    sample_potential_switches,
)

HOMOGENEOUS = "hom"
HETEROGENEOUS = "het"
BASELINE = "baseline"

SAMPLER_MODES = {
    "inch-hom": HOMOGENEOUS,
    "inch-het": HETEROGENEOUS,
    "baseline": BASELINE,
}

# Initial switch sets drawn before giving up on the sequence guard.
INIT_ATTEMPTS = 100


@dataclasses.dataclass(frozen=True)
class Tuning:
    """
    Proposal tuning parameters.
    """

    #: Volatility of the Brownian bridges proposing switch locations.
    omega: float = 1.0
    #: Weight of the independent bridge in the location proposal.
    p_mix: float = 0.5
    #: Longest block of intervals refreshed by one heterogeneous update.
    max_block: int = 5
    #: Expected fraction of intervals refreshed by one homogeneous update.
    resample_frac: float = 0.1
    #: Random-walk scale of log speeds.
    speed_step: float = 0.1
    #: Random-walk scale of rates, as a fraction of their prior bounds.
    rate_step: float = 0.2
    update_params: bool = True

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError("must be positive", field="tuning.omega")
        if not 0 <= self.p_mix <= 1:
            raise ConfigError("must lie in [0, 1]", field="tuning.p_mix")
        if self.max_block < 1:
            raise ConfigError("must be at least 1", field="tuning.max_block")
        if not 0 < self.resample_frac <= 1:
            raise ConfigError("must lie in (0, 1]", field="tuning.resample_frac")
        if self.speed_step < 0 or self.rate_step < 0:
            raise ConfigError("step sizes must be non-negative", field="tuning")


@dataclasses.dataclass(frozen=True)
class Priors:
    """
    Uniform priors: rates on ``[0, u_ij]``, speeds ordered on ``(0, speed_max)``.
    """

    speed_max: float = 50.0

    def admits(
        self,
        speeds: np.ndarray | None,
        rate_params: np.ndarray,
        rate_bounds: np.ndarray,
    ) -> bool:
        if speeds is not None and len(speeds):
            if not (
                np.all(speeds > 0)
                and np.all(np.diff(speeds) > 0)
                and speeds[-1] < self.speed_max
            ):
                return False
        return bool(np.all(rate_params >= 0) and np.all(rate_params <= rate_bounds))


@dataclasses.dataclass(frozen=True, eq=False)
class ChainContext:
    """
    Fixed inputs shared by every step of one chain.
    """

    track: ObservationTrack
    kappa: float
    mode: str = HOMOGENEOUS
    guard: int = DEFAULT_SEQUENCE_GUARD
    #: ``False`` replaces the likelihood by 1, leaving the prior as target.
    use_likelihood: bool = True


def interval_matrices(
    model: ModelSpec,
    switches: SwitchSet,
    context: ChainContext,
    intervals: Sequence[int],
) -> list[np.ndarray]:
    """
    Log transfer matrices of the given observation intervals.
    """
    if context.mode == HOMOGENEOUS:
        return interval_kernels(
            context.track, switches, model, context.kappa, context.guard, intervals
        )
    if switches.locations is None:
        raise PreconditionViolation("the heterogeneous sampler needs switch locations")
    track = context.track
    result = []
    for c in intervals:
        times = np.concatenate(
            ([track.times[c]], switches.times[c], [track.times[c + 1]])
        )
        locations = np.concatenate(
            (track.locations[c : c + 1], switches.locations[c], track.locations[c + 1 : c + 2])
        )
        result.append(log_transfer_matrix(model, context.kappa, times, locations))
    return result


def _total(alpha: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        return float(logsumexp(alpha))


@dataclasses.dataclass(frozen=True, eq=False)
class ChainState:
    """
    Parameters and potential switches with cached interval matrices and
    forward/backward messages over observations.
    """

    model: ModelSpec
    switches: SwitchSet
    log_matrices: tuple[np.ndarray, ...]
    alphas: tuple[np.ndarray, ...]
    betas: tuple[np.ndarray, ...]
    loglik: float

    @classmethod
    def build(
        cls, model: ModelSpec, switches: SwitchSet, context: ChainContext
    ) -> ChainState:
        if not context.use_likelihood:
            return cls(model, switches, (), (), (), 0.0)
        matrices = interval_matrices(
            model, switches, context, range(context.track.n_intervals)
        )
        alphas = chain_forward(model.log_initial, matrices)
        betas = chain_backward(matrices)
        return cls(
            model,
            switches,
            tuple(matrices),
            tuple(alphas),
            tuple(betas),
            _total(alphas[-1]),
        )

    def with_block(
        self, start: int, switches: SwitchSet, matrices: Sequence[np.ndarray]
    ) -> ChainState:
        """
        State after accepting new matrices for intervals ``start ..``.
        """
        if not self.log_matrices:
            return dataclasses.replace(self, switches=switches)
        stop = start + len(matrices)
        new_matrices = self.log_matrices[:start] + tuple(matrices) + self.log_matrices[stop:]
        alphas = list(self.alphas[: start + 1])
        for matrix in new_matrices[start:]:
            alphas.append(log_vecmat(alphas[-1], matrix))
        betas = list(self.betas[stop:])
        for matrix in reversed(new_matrices[:stop]):
            betas.insert(0, log_matvec(matrix, betas[0]))
        return ChainState(
            self.model,
            switches,
            new_matrices,
            tuple(alphas),
            tuple(betas),
            _total(alphas[-1]),
        )

    def occupancy(self) -> tuple[float, ...] | None:
        return None

    def verify_cache(self, context: ChainContext, tolerance: float = 1e-9) -> None:
        """
        Compare cached quantities with a fresh recomputation.

        :raises CacheIncoherent: they differ by more than ``tolerance``
        """
        fresh = ChainState.build(self.model, self.switches, context)
        scale = max(1.0, abs(fresh.loglik))
        if abs(fresh.loglik - self.loglik) > tolerance * scale:
            raise CacheIncoherent(
                "cached loglik {0!r} differs from {1!r}".format(self.loglik, fresh.loglik)
            )
        for c, (cached, computed) in enumerate(zip(self.log_matrices, fresh.log_matrices)):
            if not np.allclose(cached, computed, rtol=tolerance, atol=tolerance):
                raise CacheIncoherent("cached matrix of interval {0} is stale".format(c))
        LOGGER.debug("cache verified at loglik {}", self.loglik)


@dataclasses.dataclass(frozen=True, eq=False)
class BridgeMoments:
    """
    Moments at new times of the independent bridge (``_i``) and of the
    bridges through the anchor points (``_d``).

    Means have shape ``(m, d)``; covariances ``(m, m)`` apply to every
    coordinate.
    """

    mean_i: np.ndarray
    cov_i: np.ndarray
    mean_d: np.ndarray
    cov_d: np.ndarray

    def proposal(self, p_mix: float) -> tuple[np.ndarray, np.ndarray]:
        """
        Mean and covariance of the blended location proposal.
        """
        return (
            p_mix * self.mean_i + (1.0 - p_mix) * self.mean_d,
            p_mix**2 * self.cov_i + (1.0 - p_mix) ** 2 * self.cov_d,
        )


def _bridge(
    times: np.ndarray,
    t0: float,
    x0: np.ndarray,
    t1: float,
    x1: np.ndarray,
    omega: float,
) -> tuple[np.ndarray, np.ndarray]:
    span = t1 - t0
    offsets = times - t0
    mean = x0 + (offsets / span)[:, np.newaxis] * (x1 - x0)
    cov = omega * (np.minimum.outer(offsets, offsets) - np.outer(offsets, offsets) / span)
    return mean, cov


def bridge_moments(
    x_a: np.ndarray,
    x_b: np.ndarray,
    t_a: float,
    t_b: float,
    times_new: Sequence[float],
    omega: float,
    anchors: tuple[np.ndarray, np.ndarray] | None = None,
) -> BridgeMoments:
    """
    Brownian-bridge moments with volatility ``omega`` at ``times_new``.

    ``anchors`` holds interior times and locations the dependent bridges
    pass through; without anchors both moment sets coincide.
    """
    x_a = np.asarray(x_a, dtype=float)
    x_b = np.asarray(x_b, dtype=float)
    times_new = np.asarray(times_new, dtype=float)
    if len(times_new) and (times_new.min() <= t_a or times_new.max() >= t_b):
        raise PreconditionViolation("bridge times must lie strictly inside the interval")
    mean_i, cov_i = _bridge(times_new, t_a, x_a, t_b, x_b, omega)
    if anchors is None or len(anchors[0]) == 0:
        return BridgeMoments(mean_i, cov_i, mean_i.copy(), cov_i.copy())
    anchor_times = np.asarray(anchors[0], dtype=float)
    anchor_locations = np.asarray(anchors[1], dtype=float)
    if np.any(np.diff(anchor_times) <= 0):
        raise PreconditionViolation("anchor times must be strictly increasing")
    node_times = np.concatenate(([t_a], anchor_times, [t_b]))
    node_locations = np.vstack((x_a, anchor_locations, x_b))
    segments = np.clip(
        np.searchsorted(node_times, times_new, side="right") - 1, 0, len(node_times) - 2
    )
    mean_d = np.empty_like(mean_i)
    cov_d = np.zeros_like(cov_i)
    for g in np.unique(segments):
        index = np.nonzero(segments == g)[0]
        mean, cov = _bridge(
            times_new[index],
            node_times[g],
            node_locations[g],
            node_times[g + 1],
            node_locations[g + 1],
            omega,
        )
        mean_d[index] = mean
        cov_d[np.ix_(index, index)] = cov
    return BridgeMoments(mean_i, cov_i, mean_d, cov_d)


def _fragment_logpdf(locations: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    if len(locations) == 0:
        return 0.0
    residual = locations - mean
    try:
        value = multivariate_normal.logpdf(
            residual.T, mean=np.zeros(len(residual)), cov=cov
        )
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DegenerateCovariance(
            "location proposal covariance is singular: {0}".format(exc)
        ) from exc
    return float(np.sum(value))


def _sample_fragment(
    mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    count, dim = mean.shape
    if count == 0:
        return np.empty((0, dim))
    noise = rng.multivariate_normal(np.zeros(count), cov, size=dim)
    return mean + noise.T


def het_fragment_log_q(
    track: ObservationTrack,
    c: int,
    times: np.ndarray,
    locations: np.ndarray,
    anchor_times: np.ndarray,
    anchor_locations: np.ndarray,
    tuning: Tuning,
    kappa: float,
) -> float:
    """
    Log proposal density of one interval's switch times and locations,
    given the fragment whose points anchor the dependent bridges.
    """
    t_c, t_next = track.interval(c)
    moments = bridge_moments(
        track.locations[c],
        track.locations[c + 1],
        t_c,
        t_next,
        times,
        tuning.omega,
        anchors=(anchor_times, anchor_locations),
    )
    mean, cov = moments.proposal(tuning.p_mix)
    return poisson_process_log_density(len(times), t_next - t_c, kappa) + _fragment_logpdf(
        locations, mean, cov
    )


@dataclasses.dataclass(frozen=True, eq=False)
class HetProposal:
    """
    New switch times and locations for intervals ``start .. start + len(times) - 1``.
    """

    start: int
    times: tuple[np.ndarray, ...]
    locations: tuple[np.ndarray, ...]
    log_q_forward: float
    log_q_reverse: float


def propose_het_block(
    state: ChainState,
    a: int,
    b: int,
    tuning: Tuning,
    context: ChainContext,
    rng: np.random.Generator,
) -> HetProposal:
    """
    Propose switch times from the Poisson prior and locations from the
    blended bridge Gaussian for intervals ``a .. b - 1``.
    """
    track = context.track
    switches = state.switches
    if not 0 <= a < b <= track.n_intervals:
        raise PreconditionViolation("need 0 <= a < b <= {0}".format(track.n_intervals))
    if switches.locations is None:
        raise PreconditionViolation("the heterogeneous sampler needs switch locations")
    new_times = []
    new_locations = []
    log_q_forward = 0.0
    log_q_reverse = 0.0
    for c in range(a, b):
        t_c, t_next = track.interval(c)
        old_times = switches.times[c]
        old_locations = switches.locations[c]
        times = sample_potential_switches(t_c, t_next, context.kappa, rng)
        moments = bridge_moments(
            track.locations[c],
            track.locations[c + 1],
            t_c,
            t_next,
            times,
            tuning.omega,
            anchors=(old_times, old_locations),
        )
        mean, cov = moments.proposal(tuning.p_mix)
        locations = _sample_fragment(mean, cov, rng)
        log_q_forward += poisson_process_log_density(
            len(times), t_next - t_c, context.kappa
        ) + _fragment_logpdf(locations, mean, cov)
        # Reverse move anchors on the new points.
        log_q_reverse += het_fragment_log_q(
            track, c, old_times, old_locations, times, locations, tuning, context.kappa
        )
        new_times.append(times)
        new_locations.append(locations)
    return HetProposal(a, tuple(new_times), tuple(new_locations), log_q_forward, log_q_reverse)


def _times_log_prior(
    track: ObservationTrack, start: int, times: Sequence[np.ndarray], kappa: float
) -> float:
    total = 0.0
    for offset, interval_times in enumerate(times):
        t_c, t_next = track.interval(start + offset)
        total += poisson_process_log_density(len(interval_times), t_next - t_c, kappa)
    return total


def het_log_ratio(
    state: ChainState, proposal: HetProposal, context: ChainContext
) -> tuple[float, SwitchSet, list[np.ndarray]]:
    """
    Log Hastings ratio of a heterogeneous block proposal, with the proposed
    switch set and its interval matrices.
    """
    track = context.track
    start = proposal.start
    stop = start + len(proposal.times)
    switches = state.switches.replace(start, proposal.times, proposal.locations)
    old_times = state.switches.times[start:stop]
    log_ratio = (
        _times_log_prior(track, start, proposal.times, context.kappa)
        - _times_log_prior(track, start, old_times, context.kappa)
        + proposal.log_q_reverse
        - proposal.log_q_forward
    )
    matrices: list[np.ndarray] = []
    if context.use_likelihood:
        matrices = interval_matrices(state.model, switches, context, range(start, stop))
        loglik = chain_block_loglik(state.alphas[start], matrices, state.betas[stop])
        log_ratio += loglik - state.loglik
    return log_ratio, switches, matrices


def mh_step_het(
    state: ChainState,
    tuning: Tuning,
    context: ChainContext,
    rng: np.random.Generator,
) -> tuple[ChainState, bool]:
    """
    Refresh switch times and locations on a random block of intervals.
    """
    n_intervals = context.track.n_intervals
    a = int(rng.integers(n_intervals))
    length = int(rng.integers(1, min(tuning.max_block, n_intervals - a) + 1))
    proposal = propose_het_block(state, a, a + length, tuning, context, rng)
    log_ratio, switches, matrices = het_log_ratio(state, proposal, context)
    if np.log(rng.random()) < log_ratio:
        return state.with_block(a, switches, matrices), True
    return state, False


def mh_step_hom(
    state: ChainState,
    tuning: Tuning,
    context: ChainContext,
    rng: np.random.Generator,
) -> tuple[ChainState, bool]:
    """
    Redraw the switch times of a random block of intervals from their
    Poisson-process prior; the prior and proposal cancel in the ratio.
    """
    track = context.track
    n_intervals = track.n_intervals
    length = max(1, int(rng.binomial(n_intervals, tuning.resample_frac)))
    start = int(rng.integers(n_intervals - length + 1))
    stop = start + length
    times = [
        sample_potential_switches(*track.interval(c), context.kappa, rng)
        for c in range(start, stop)
    ]
    switches = state.switches.replace(start, times)
    threshold = np.log(rng.random())
    if not context.use_likelihood:
        return dataclasses.replace(state, switches=switches), True
    try:
        matrices = interval_matrices(state.model, switches, context, range(start, stop))
    except TooManySwitches as exc:
        LOGGER.warning(
            "interval {}: {} potential switches exceed the sequence guard;"
            " proposal rejected",
            exc.interval,
            exc.count,
        )
        return state, False
    loglik = chain_block_loglik(state.alphas[start], matrices, state.betas[stop])
    if threshold < loglik - state.loglik:
        return state.with_block(start, switches, matrices), True
    return state, False


@dataclasses.dataclass(frozen=True, eq=False)
class ParamProposal:
    """
    Proposed speeds and rate parameters with the log Jacobian of the
    speed random walk.
    """

    speeds: np.ndarray | None
    rate_params: np.ndarray
    log_jacobian: float


def reflect(values: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """
    Fold ``values`` back into ``[0, upper]`` by reflecting at both ends.
    """
    period = 2 * upper
    folded = np.mod(values, period)
    return np.where(folded > upper, period - folded, folded)


def propose_params(
    model: ModelSpec, tuning: Tuning, rng: np.random.Generator
) -> ParamProposal:
    """
    Multiplicative random walk on the speeds; random walk on every free rate
    parameter, reflected into ``[0, u_ij]`` and scaled by ``u_ij``.
    """
    log_jacobian = 0.0
    speeds = model.speeds
    if speeds is not None and tuning.speed_step > 0:
        new_speeds = speeds * np.exp(tuning.speed_step * rng.standard_normal(len(speeds)))
        log_jacobian += float(np.sum(np.log(new_speeds)) - np.sum(np.log(speeds)))
        speeds = new_speeds
    params = model.rates.params
    if tuning.rate_step > 0 and len(params):
        upper = model.rates.param_bounds
        steps = tuning.rate_step * upper * rng.standard_normal(len(params))
        params = reflect(params + steps, upper)
    return ParamProposal(speeds, params.copy(), log_jacobian)


def proposed_model(model: ModelSpec, proposal: ParamProposal) -> ModelSpec:
    if proposal.speeds is not None:
        model = model.with_speeds(proposal.speeds)
    return model.with_rate_params(proposal.rate_params)


def mh_step_params(
    state: ChainState,
    tuning: Tuning,
    priors: Priors,
    context: ChainContext,
    rng: np.random.Generator,
) -> tuple[ChainState, bool]:
    """
    Update speeds and rates with the switches held fixed.
    """
    proposal = propose_params(state.model, tuning, rng)
    threshold = np.log(rng.random())
    if not priors.admits(
        proposal.speeds, proposal.rate_params, state.model.rates.param_bounds
    ):
        return state, False
    candidate = ChainState.build(proposed_model(state.model, proposal), state.switches, context)
    if threshold < candidate.loglik - state.loglik + proposal.log_jacobian:
        return candidate, True
    return state, False


class AcceptanceStats:
    """
    Proposal and acceptance counts per move type.
    """

    def __init__(self):
        self.proposed: dict[str, int] = {}
        self.accepted: dict[str, int] = {}

    def record(self, move: str, accepted: bool) -> None:
        self.proposed[move] = self.proposed.get(move, 0) + 1
        self.accepted[move] = self.accepted.get(move, 0) + int(accepted)

    def rates(self) -> dict[str, float]:
        return {
            move: self.accepted[move] / count
            for move, count in sorted(self.proposed.items())
        }


@dataclasses.dataclass(frozen=True, eq=False)
class ChainRun:
    """
    Output of one chain.
    """

    samples: list[SampleRecord]
    acceptance: dict[str, float]
    #: Seconds spent iterating; ``None`` when timing is disabled.
    wall_time: float | None
    sampler: str
    kappa: float
    iterations: int
    burn_in: int
    thin: int


def _initial_locations(
    track: ObservationTrack,
    switches: SwitchSet,
    tuning: Tuning,
    rng: np.random.Generator,
) -> tuple[np.ndarray, ...]:
    locations = []
    for c in range(track.n_intervals):
        t_c, t_next = track.interval(c)
        moments = bridge_moments(
            track.locations[c], track.locations[c + 1], t_c, t_next, switches.times[c], tuning.omega
        )
        locations.append(_sample_fragment(moments.mean_i, moments.cov_i, rng))
    return tuple(locations)


def initial_chain_state(
    model: ModelSpec,
    context: ChainContext,
    tuning: Tuning,
    rng: np.random.Generator,
) -> ChainState:
    """
    Draw switches from the prior until the sequence guard is respected.

    :raises GuardBreach: no admissible switch set after ``INIT_ATTEMPTS`` draws
    """
    track = context.track
    for _ in range(INIT_ATTEMPTS):
        switches = SwitchSet.sample(track, context.kappa, rng)
        if context.mode == HETEROGENEOUS:
            switches = SwitchSet(
                switches.times, _initial_locations(track, switches, tuning, rng)
            )
        try:
            return ChainState.build(model, switches, context)
        except TooManySwitches as exc:
            LOGGER.warning(
                "initial switch set rejected: interval {} has {} potential switches",
                exc.interval,
                exc.count,
            )
    raise GuardBreach(
        "no initial switch set respects the sequence guard after {0} attempts".format(
            INIT_ATTEMPTS
        )
    )


def _check_run(
    model: ModelSpec,
    iters: int,
    burn_in: int,
    thin: int,
    sampler: str,
    kappa: float | None,
) -> float:
    if iters < burn_in:
        raise ConfigError(
            "{0} iterations do not cover a burn-in of {1}".format(iters, burn_in),
            field="run.iterations",
        )
    if thin < 1:
        raise ConfigError("must be at least 1", field="run.thin")
    if sampler not in SAMPLER_MODES:
        raise ConfigError(
            "must be one of {0}".format(", ".join(SAMPLER_MODES)), field="run.sampler"
        )
    if SAMPLER_MODES[sampler] != HETEROGENEOUS and not model.rates.homogeneous:
        raise ConfigError(
            "{0} needs spatially homogeneous rates".format(sampler), field="run.sampler"
        )
    if SAMPLER_MODES[sampler] == BASELINE and not model.is_brownian:
        raise ConfigError("baseline needs Brownian kernels", field="run.sampler")
    try:
        minimum = choose_kappa(model)
    except UnboundedPrior as exc:
        raise ConfigError(str(exc), field="model.rates.bounds") from exc
    if kappa is None:
        return minimum
    if kappa < minimum * (1.0 - 1e-12):
        raise ConfigError(
            "{0!r} is below the largest bounded out-rate {1!r}".format(kappa, minimum),
            field="run.kappa",
        )
    return kappa


def sample_chain(
    model: ModelSpec,
    track: ObservationTrack,
    tuning: Tuning,
    priors: Priors,
    iters: int,
    burn_in: int,
    thin: int,
    seed: int,
    *,
    sampler: str = "inch-hom",
    kappa: float | None = None,
    guard: int = DEFAULT_SEQUENCE_GUARD,
    record_timing: bool = True,
    debug: bool = False,
    use_likelihood: bool = True,
    log_every: int = 0,
) -> ChainRun:
    """
    Run one chain and collect thinned draws, acceptance rates and timing.

    Draw ``iteration`` is kept when ``iteration > burn_in`` and
    ``(iteration - burn_in) % thin == 0``.
    """
    kappa = _check_run(model, iters, burn_in, thin, sampler, kappa)
    mode = SAMPLER_MODES[sampler]
    context = ChainContext(track, kappa, mode, guard, use_likelihood)
    rng = np.random.default_rng(seed)

    moves: list[tuple[str, Callable]]
    if mode == BASELINE:
        # pylint: disable-next=import-outside-toplevel
        from . import baseline

        state = baseline.initial_baseline_state(model, context, rng)
        moves = [
            (
                "switches",
                functools.partial(baseline.mh_step_baseline, tuning=tuning, context=context),
            ),
            (
                "labels",
                functools.partial(baseline.mh_step_relabel, tuning=tuning, context=context),
            ),
        ]
        params_move = functools.partial(
            baseline.mh_step_baseline_params, tuning=tuning, priors=priors, context=context
        )
    else:
        state = initial_chain_state(model, context, tuning, rng)
        step = mh_step_hom if mode == HOMOGENEOUS else mh_step_het
        moves = [("switches", functools.partial(step, tuning=tuning, context=context))]
        params_move = functools.partial(
            mh_step_params, tuning=tuning, priors=priors, context=context
        )
    if tuning.update_params:
        moves.append(("params", params_move))

    stats = AcceptanceStats()
    samples: list[SampleRecord] = []
    started = time.perf_counter()
    for iteration in range(1, iters + 1):
        for name, move in moves:
            state, accepted = move(state, rng=rng)
            stats.record(name, accepted)
            if debug and accepted:
                state.verify_cache(context)
        if iteration > burn_in and (iteration - burn_in) % thin == 0:
            elapsed = time.perf_counter() - started if record_timing else 0.0
            samples.append(_record(state, iteration, elapsed))
        if log_every and iteration % log_every == 0:
            LOGGER.info(
                "iteration {} of {}: loglik {:.6g}, {} potential switches",
                iteration,
                iters,
                state.loglik,
                state.switches.total,
            )
    wall_time = time.perf_counter() - started if record_timing else None
    acceptance = stats.rates()
    LOGGER.info(
        "{} acceptance rates: {}",
        sampler,
        ", ".join("{0}={1:.3f}".format(move, rate) for move, rate in acceptance.items()),
    )
    return ChainRun(samples, acceptance, wall_time, sampler, kappa, iters, burn_in, thin)


def _record(state, iteration: int, elapsed: float) -> SampleRecord:
    model = state.model
    speeds = model.speeds
    return SampleRecord(
        iteration=iteration,
        loglik=float(state.loglik),
        speeds=tuple(float(v) for v in speeds) if speeds is not None else (),
        rate_params=tuple(float(p) for p in model.rates.params),
        rate_names=tuple(model.rates.param_names),
        switch_counts=tuple(int(m) for m in state.switches.counts),
        elapsed_s=elapsed,
        occupancy=state.occupancy(),
    )


def run_chain(
    model: ModelSpec,
    track: ObservationTrack,
    tuning: Tuning,
    priors: Priors,
    iters: int,
    burn_in: int,
    thin: int,
    seed: int,
    **kwargs,
) -> list[SampleRecord]:
    """
    Thinned posterior draws of one chain; see :func:`sample_chain`.
    """
    return sample_chain(
        model, track, tuning, priors, iters, burn_in, thin, seed, **kwargs
    ).samples
