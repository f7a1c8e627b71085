# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Test mcmc module.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging

import numpy as np
import pytest
from scipy.special import gammaln, logsumexp

from inch_movement.diagnostics import ess
from inch_movement.errors import CacheIncoherent, ConfigError, GuardBreach, PreconditionViolation
from inch_movement.homolik import interval_kernel
from inch_movement.mcmc import (
    HETEROGENEOUS,
    HOMOGENEOUS,
    AcceptanceStats,
    ChainContext,
    ChainState,
    HetProposal,
    Priors,
    Tuning,
    bridge_moments,
    het_fragment_log_q,
    het_log_ratio,
    initial_chain_state,
    mh_step_het,
    mh_step_hom,
    mh_step_params,
    propose_het_block,
    reflect,
    run_chain,
    sample_chain,
)
from inch_movement.model import (
    BrownianIsotropic,
    ConstantRates,
    GaussianPatchRates,
    LinearGaussian,
    ModelSpec,
)
from inch_movement.track import ObservationTrack
from inch_movement.uniformization import SwitchSet


def two_state_model(speeds=(0.5, 8.0), rate: float = 0.1) -> ModelSpec:
    rates = np.array([[0.0, rate], [rate, 0.0]])
    return ModelSpec(tuple(BrownianIsotropic(v) for v in speeds), ConstantRates(rates))


def small_track(n_obs: int = 8, seed: int = 0) -> ObservationTrack:
    rng = np.random.default_rng(seed)
    times = np.cumsum(np.concatenate(([0.0], rng.choice([9.0, 11.0], size=n_obs - 1))))
    return ObservationTrack(times, np.cumsum(rng.normal(scale=3.0, size=(n_obs, 2)), axis=0))


def test_tuning_validation():
    Tuning()
    with pytest.raises(ConfigError, match="tuning.omega"):
        Tuning(omega=0.0)
    with pytest.raises(ConfigError, match="tuning.p_mix"):
        Tuning(p_mix=1.5)
    with pytest.raises(ConfigError, match="tuning.max_block"):
        Tuning(max_block=0)
    with pytest.raises(ConfigError, match="tuning.resample_frac"):
        Tuning(resample_frac=0.0)
    with pytest.raises(ConfigError, match="tuning"):
        Tuning(speed_step=-1.0)


def test_priors_admits():
    priors = Priors(speed_max=10.0)
    bounds = np.array([0.1, 0.1])
    assert priors.admits(np.array([1.0, 2.0]), np.array([0.05, 0.1]), bounds)
    assert not priors.admits(np.array([2.0, 1.0]), np.array([0.05, 0.05]), bounds)
    assert not priors.admits(np.array([1.0, 10.0]), np.array([0.05, 0.05]), bounds)
    assert not priors.admits(np.array([1.0, 2.0]), np.array([0.05, 0.11]), bounds)
    assert priors.admits(None, np.array([0.0, 0.1]), bounds)


def test_bridge_moments_without_anchors():
    moments = bridge_moments(
        np.array([0.0, 0.0]), np.array([10.0, -5.0]), 0.0, 10.0, [2.0, 5.0], 2.0
    )
    np.testing.assert_allclose(moments.mean_i, [[2.0, -1.0], [5.0, -2.5]])
    np.testing.assert_allclose(
        moments.cov_i, 2.0 * np.array([[2.0 - 0.4, 2.0 - 1.0], [2.0 - 1.0, 5.0 - 2.5]])
    )
    np.testing.assert_allclose(moments.mean_d, moments.mean_i)
    mean, cov = moments.proposal(0.3)
    np.testing.assert_allclose(mean, moments.mean_i)
    np.testing.assert_allclose(cov, (0.09 + 0.49) * moments.cov_i)


def test_bridge_moments_with_anchors():
    moments = bridge_moments(
        np.array([0.0, 0.0]),
        np.array([10.0, 0.0]),
        0.0,
        10.0,
        [2.0, 8.0],
        1.0,
        anchors=(np.array([4.0]), np.array([[0.0, 4.0]])),
    )
    # 2.0 lies on the bridge (0, 0) -> (0, 4) over (0, 4), 8.0 on (0, 4) -> (10, 0) over (4, 10).
    np.testing.assert_allclose(moments.mean_d, [[0.0, 2.0], [20.0 / 3.0, 4.0 / 3.0]])
    np.testing.assert_allclose(moments.cov_d, [[1.0, 0.0], [0.0, 4.0 * 2.0 / 6.0]])
    with pytest.raises(PreconditionViolation):
        bridge_moments(np.zeros(2), np.ones(2), 0.0, 10.0, [10.0], 1.0)


def test_het_identical_proposal_has_zero_log_ratio():
    model = two_state_model()
    track = small_track()
    tuning = Tuning(omega=3.0)
    context = ChainContext(track, 0.2, HETEROGENEOUS)
    state = initial_chain_state(model, context, tuning, np.random.default_rng(1))
    a, b = 2, 5
    log_q = sum(
        het_fragment_log_q(
            track,
            c,
            state.switches.times[c],
            state.switches.locations[c],
            state.switches.times[c],
            state.switches.locations[c],
            tuning,
            context.kappa,
        )
        for c in range(a, b)
    )
    proposal = HetProposal(
        a, state.switches.times[a:b], state.switches.locations[a:b], log_q, log_q
    )
    log_ratio, _, _ = het_log_ratio(state, proposal, context)
    assert log_ratio == pytest.approx(0.0, abs=1e-9)


def test_het_proposal_block():
    model = two_state_model()
    track = small_track()
    tuning = Tuning(omega=3.0)
    context = ChainContext(track, 0.2, HETEROGENEOUS)
    rng = np.random.default_rng(2)
    state = initial_chain_state(model, context, tuning, rng)
    proposal = propose_het_block(state, 1, 4, tuning, context, rng)
    assert proposal.start == 1
    assert len(proposal.times) == len(proposal.locations) == 3
    for c, (times, locations) in enumerate(zip(proposal.times, proposal.locations), start=1):
        t_c, t_next = track.interval(c)
        assert np.all((times > t_c) & (times < t_next))
        assert locations.shape == (len(times), 2)
    assert np.isfinite(proposal.log_q_forward) and np.isfinite(proposal.log_q_reverse)
    with pytest.raises(PreconditionViolation):
        propose_het_block(state, 3, 3, tuning, context, rng)


@pytest.mark.parametrize("sampler", ["inch-hom", "inch-het"])
def test_cached_messages_stay_coherent(sampler):
    model = two_state_model()
    track = small_track(10, seed=3)
    # debug=True recomputes everything after each accepted move.
    run = sample_chain(
        model,
        track,
        Tuning(omega=3.0, resample_frac=0.3, max_block=3, speed_step=0.2, rate_step=0.3),
        Priors(speed_max=50.0),
        300,
        0,
        10,
        4,
        sampler=sampler,
        kappa=0.2,
        debug=True,
        record_timing=False,
    )
    assert len(run.samples) == 30
    assert set(run.acceptance) == {"switches", "params"}
    assert 0.0 < run.acceptance["switches"] <= 1.0


def test_verify_cache_detects_stale_state():
    model = two_state_model()
    context = ChainContext(small_track(), 0.2, HOMOGENEOUS)
    state = initial_chain_state(model, context, Tuning(), np.random.default_rng(0))
    state.verify_cache(context)
    with pytest.raises(CacheIncoherent):
        dataclasses.replace(state, loglik=state.loglik + 1.0).verify_cache(context)
    stale = dataclasses.replace(
        state, log_matrices=(state.log_matrices[0] + 0.1,) + state.log_matrices[1:]
    )
    with pytest.raises(CacheIncoherent):
        stale.verify_cache(context)


def test_with_block_matches_rebuild():
    model = two_state_model()
    track = small_track(9, seed=4)
    context = ChainContext(track, 0.2, HOMOGENEOUS)
    rng = np.random.default_rng(5)
    state = initial_chain_state(model, context, Tuning(), rng)
    times = [np.sort(rng.uniform(*track.interval(c), size=2)) for c in (3, 4)]
    switches = state.switches.replace(3, times)
    fresh = ChainState.build(model, switches, context)
    updated = state.with_block(3, switches, list(fresh.log_matrices[3:5]))
    assert updated.loglik == pytest.approx(fresh.loglik, rel=1e-12)
    for cached, computed in zip(updated.alphas, fresh.alphas):
        np.testing.assert_allclose(cached, computed, rtol=1e-12)
    for cached, computed in zip(updated.betas, fresh.betas):
        np.testing.assert_allclose(cached, computed, rtol=1e-12)


def test_hom_step_always_accepts_with_identical_speeds():
    model = ModelSpec(
        (LinearGaussian.brownian(2.0), LinearGaussian.brownian(2.0)),
        ConstantRates(np.array([[0.0, 0.1], [0.1, 0.0]])),
    )
    context = ChainContext(small_track(), 0.2, HOMOGENEOUS)
    rng = np.random.default_rng(6)
    state = initial_chain_state(model, context, Tuning(), rng)
    for _ in range(50):
        state, accepted = mh_step_hom(state, Tuning(resample_frac=0.5), context, rng)
        assert accepted


def test_hom_step_rejects_guard_breach(caplog):
    model = two_state_model()
    track = ObservationTrack([0.0, 10.0, 20.0], [[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    state = ChainState.build(model, SwitchSet.empty(2), ChainContext(track, 5.0, HOMOGENEOUS))
    tight = ChainContext(track, 5.0, HOMOGENEOUS, guard=1)
    with caplog.at_level(logging.WARNING, logger="inch"):
        new_state, accepted = mh_step_hom(state, Tuning(), tight, np.random.default_rng(7))
    assert not accepted
    assert new_state is state
    assert "exceed the sequence guard" in caplog.text


def test_het_step_keeps_cache_coherent():
    context = ChainContext(small_track(10, seed=8), 0.2, HETEROGENEOUS)
    tuning = Tuning(omega=3.0, max_block=4)
    rng = np.random.default_rng(9)
    state = initial_chain_state(two_state_model(), context, tuning, rng)
    accepted_any = False
    for _ in range(100):
        new_state, accepted = mh_step_het(state, tuning, context, rng)
        if accepted:
            accepted_any = True
            new_state.verify_cache(context)
        else:
            assert new_state is state
        state = new_state
    assert accepted_any


def test_param_step_with_zero_steps_always_accepts():
    context = ChainContext(small_track(), 0.2, HOMOGENEOUS)
    rng = np.random.default_rng(10)
    state = initial_chain_state(two_state_model(), context, Tuning(), rng)
    tuning = Tuning(speed_step=0.0, rate_step=0.0)
    for _ in range(20):
        new_state, accepted = mh_step_params(state, tuning, Priors(), context, rng)
        assert accepted
        assert new_state.loglik == pytest.approx(state.loglik, rel=1e-12)
        np.testing.assert_array_equal(new_state.model.speeds, state.model.speeds)


def test_param_step_rejects_outside_prior():
    context = ChainContext(small_track(), 0.2, HOMOGENEOUS)
    rng = np.random.default_rng(11)
    state = initial_chain_state(two_state_model(), context, Tuning(), rng)
    for _ in range(20):
        new_state, accepted = mh_step_params(
            state, Tuning(), Priors(speed_max=1.0), context, rng
        )
        assert not accepted
        assert new_state is state


def test_param_step_updates_cache():
    context = ChainContext(small_track(10, seed=12), 0.2, HOMOGENEOUS)
    rng = np.random.default_rng(13)
    state = initial_chain_state(two_state_model(), context, Tuning(), rng)
    tuning = Tuning(speed_step=0.3, rate_step=0.5)
    moves = 0
    for _ in range(100):
        state, accepted = mh_step_params(state, tuning, Priors(), context, rng)
        if accepted:
            moves += 1
            state.verify_cache(context)
    assert moves > 0
    assert state.model.speeds[0] < state.model.speeds[1]


def test_initial_state_guard_breach():
    context = ChainContext(small_track(), 5.0, HOMOGENEOUS, guard=1)
    with pytest.raises(GuardBreach, match="100 attempts"):
        initial_chain_state(two_state_model(), context, Tuning(), np.random.default_rng(0))


def test_run_chain_thinning_and_determinism():
    kwargs = dict(sampler="inch-hom", kappa=0.2, record_timing=False)
    args = (two_state_model(), small_track(), Tuning(), Priors(), 50, 10, 5, 11)
    first = run_chain(*args, **kwargs)
    second = run_chain(*args, **kwargs)
    assert [sample.iteration for sample in first] == list(range(15, 51, 5))
    assert [sample.columns() for sample in first] == [sample.columns() for sample in second]
    assert all(sample.elapsed_s == 0.0 for sample in first)
    assert first[0].rate_names == ("rate_1_2", "rate_2_1")


def test_chain_run_records_timing():
    run = sample_chain(
        two_state_model(), small_track(), Tuning(), Priors(), 20, 0, 1, 0, kappa=0.2
    )
    assert run.wall_time is not None and run.wall_time > 0
    assert run.samples[-1].elapsed_s >= run.samples[0].elapsed_s
    assert run.iterations == 20 and run.thin == 1 and run.kappa == 0.2


@pytest.mark.parametrize(
    "overrides, field",
    [
        (dict(iters=5, burn_in=10), "run.iterations"),
        (dict(thin=0), "run.thin"),
        (dict(sampler="gibbs"), "run.sampler"),
        (dict(kappa=0.05), "run.kappa"),
    ],
)
def test_sample_chain_validation(overrides, field):
    args = dict(iters=10, burn_in=0, thin=1, sampler=HOMOGENEOUS, kappa=None)
    args.update(overrides)
    with pytest.raises(ConfigError, match=field):
        sample_chain(
            two_state_model(),
            small_track(),
            Tuning(),
            Priors(),
            args["iters"],
            args["burn_in"],
            args["thin"],
            0,
            sampler=args["sampler"],
            kappa=args["kappa"],
        )


def test_sampler_needs_matching_model():
    patchy = ModelSpec(
        (BrownianIsotropic(1.0), BrownianIsotropic(2.0)),
        GaussianPatchRates(np.array([[0.0, 0.1], [0.1, 0.0]]), [0.0, 0.0], 5.0),
    )
    with pytest.raises(ConfigError, match="homogeneous"):
        sample_chain(patchy, small_track(), Tuning(), Priors(), 10, 0, 1, 0, sampler="inch-hom")
    linear = ModelSpec(
        (LinearGaussian.brownian(1.0), LinearGaussian.brownian(2.0)),
        ConstantRates(np.array([[0.0, 0.1], [0.1, 0.0]])),
    )
    with pytest.raises(ConfigError, match="Brownian"):
        sample_chain(linear, small_track(), Tuning(), Priors(), 10, 0, 1, 0, sampler="baseline")


def test_heterogeneous_sampler_runs_with_patch_rates():
    patchy = ModelSpec(
        (BrownianIsotropic(1.0), BrownianIsotropic(6.0)),
        GaussianPatchRates(np.array([[0.0, 0.1], [0.1, 0.0]]), [0.0, 0.0], 5.0),
    )
    run = sample_chain(
        patchy,
        small_track(),
        Tuning(omega=3.0, update_params=True),
        Priors(),
        100,
        0,
        5,
        1,
        sampler="inch-het",
        debug=True,
    )
    assert len(run.samples) == 20
    assert run.samples[0].rate_names == ("rate_1_2", "rate_2_1")


def test_acceptance_stats():
    stats = AcceptanceStats()
    for accepted in (True, False, False, True):
        stats.record("switches", accepted)
    stats.record("params", False)
    assert stats.rates() == {"params": 0.0, "switches": 0.5}


# One interval with two states and fixed parameters: the posterior over the
# number of potential switches, by quadrature for few switches and Monte Carlo
# for more.
EXACT_KAPPA = 0.2
EXACT_DURATION = 10.0
EXACT_START = np.array([0.0, 0.0])
EXACT_END = np.array([6.0, 2.0])
EXACT_MAX_COUNT = 9


def _exact_likelihood(model: ModelSpec, times: np.ndarray) -> float:
    log_f = interval_kernel(
        model, EXACT_KAPPA, EXACT_START, EXACT_END, 0.0, np.sort(times), EXACT_DURATION
    ).log_values
    return float(np.exp(logsumexp(model.log_initial[:, np.newaxis] + log_f)))


@pytest.fixture(scope="module")
def switch_count_posterior() -> np.ndarray:
    model = two_state_model()
    rng = np.random.default_rng(99)
    nodes, weights = np.polynomial.legendre.leggauss(12)
    nodes = 0.5 * EXACT_DURATION * (nodes + 1.0)
    weights = weights * 0.5
    expectations = [_exact_likelihood(model, np.empty(0))]
    for m in range(1, EXACT_MAX_COUNT + 1):
        if m <= 3:
            total = 0.0
            for index in itertools.product(range(len(nodes)), repeat=m):
                total += np.prod(weights[list(index)]) * _exact_likelihood(model, nodes[list(index)])
            expectations.append(total)
        else:
            samples = rng.uniform(0.0, EXACT_DURATION, size=(3000, m))
            expectations.append(np.mean([_exact_likelihood(model, row) for row in samples]))
    mean = EXACT_KAPPA * EXACT_DURATION
    counts = np.arange(EXACT_MAX_COUNT + 1)
    prior = np.exp(counts * np.log(mean) - mean - gammaln(counts + 1))
    posterior = prior * np.array(expectations)
    return posterior / posterior.sum()


@pytest.mark.parametrize("sampler", ["inch-hom", "inch-het", "baseline"])
def test_switch_count_posterior_matches_quadrature(sampler, switch_count_posterior):
    track = ObservationTrack([0.0, EXACT_DURATION], np.vstack((EXACT_START, EXACT_END)))
    samples = run_chain(
        two_state_model(),
        track,
        Tuning(omega=4.0, max_block=1, resample_frac=0.5, update_params=False),
        Priors(),
        20000,
        1000,
        1,
        2024,
        sampler=sampler,
        kappa=EXACT_KAPPA,
        record_timing=False,
    )
    counts = np.array([sample.switch_counts[0] for sample in samples])
    for m in range(4):
        indicator = (counts == m).astype(float)
        frequency = indicator.mean()
        expected = switch_count_posterior[m]
        se = np.sqrt(max(expected * (1.0 - expected), 1e-6) / ess(indicator))
        assert abs(frequency - expected) < 4 * se + 0.005, (m, frequency, expected)


def test_parameters_follow_prior_without_likelihood():
    bound = 0.1
    speed_max = 10.0
    model = ModelSpec(
        (BrownianIsotropic(2.0), BrownianIsotropic(6.0)),
        ConstantRates(np.array([[0.0, 0.05], [0.05, 0.0]]), np.full((2, 2), bound)),
    )
    run = sample_chain(
        model,
        small_track(),
        Tuning(speed_step=0.5, rate_step=0.8),
        Priors(speed_max=speed_max),
        40000,
        2000,
        1,
        5,
        kappa=0.2,
        use_likelihood=False,
        record_timing=False,
    )
    speeds = np.array([sample.speeds for sample in run.samples])
    rates = np.array([sample.rate_params for sample in run.samples])
    # Ordered uniforms on (0, S) have means S/3 and 2S/3; rates are uniform on (0, u).
    for series, expected, sd in (
        (speeds[:, 0], speed_max / 3.0, speed_max * np.sqrt(2.0) / 6.0),
        (speeds[:, 1], 2.0 * speed_max / 3.0, speed_max * np.sqrt(2.0) / 6.0),
        (rates[:, 0], bound / 2.0, bound / np.sqrt(12.0)),
        (rates[:, 1], bound / 2.0, bound / np.sqrt(12.0)),
    ):
        se = sd / np.sqrt(ess(series))
        assert abs(series.mean() - expected) < 5 * se


def test_reflect():
    upper = np.array([1.0, 1.0, 1.0, 2.0, 0.5])
    values = np.array([0.25, -0.25, 1.25, 5.5, -1.2])
    np.testing.assert_allclose(reflect(values, upper), [0.25, 0.25, 0.75, 1.5, 0.2])


def test_rates_leave_zero_without_likelihood():
    bound = 0.1
    model = ModelSpec(
        (BrownianIsotropic(2.0), BrownianIsotropic(6.0)),
        ConstantRates(np.zeros((2, 2)), np.full((2, 2), bound)),
    )
    run = sample_chain(
        model,
        small_track(),
        Tuning(speed_step=0.0, rate_step=0.5),
        Priors(),
        5000,
        0,
        1,
        3,
        kappa=0.2,
        use_likelihood=False,
        record_timing=False,
    )
    rates = np.array([sample.rate_params for sample in run.samples])
    assert rates.min() >= 0 and rates.max() <= bound
    for series in rates.T:
        assert np.mean(series > 0) > 0.99
        se = bound / np.sqrt(12.0) / np.sqrt(ess(series))
        assert abs(series.mean() - bound / 2.0) < 5 * se
