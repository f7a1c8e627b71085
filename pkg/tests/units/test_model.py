# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Test model module.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from inch_movement.errors import ConfigError, DegenerateCovariance, PreconditionViolation
from inch_movement.model import (
    BrownianIsotropic,
    ConstantRates,
    GaussianPatchRates,
    LinearGaussian,
    ModelSpec,
    create_rate_function,
    out_rate,
    register_rate_family,
    segment_log_density,
    uniform_transition_probs,
)


def three_state_model(rate: float = 0.02) -> ModelSpec:
    rates = np.full((3, 3), rate)
    np.fill_diagonal(rates, 0.0)
    return ModelSpec(
        tuple(BrownianIsotropic(speed) for speed in (0.5, 3.0, 12.0)),
        ConstantRates(rates, rates * 2.5),
    )


@pytest.mark.parametrize(
    "speed, dt, x0, x1",
    [
        (1.0, 1.0, [0.0, 0.0], [0.0, 0.0]),
        (0.5, 10.0, [1.0, -2.0], [3.0, 4.0]),
        (12.0, 0.25, [100.0, 50.0], [99.0, 52.5]),
    ],
)
def test_brownian_log_density(speed, dt, x0, x1):
    kernel = BrownianIsotropic(speed)
    expected = multivariate_normal.logpdf(x1, mean=x0, cov=np.eye(2) * speed * dt)
    assert kernel.log_density(np.array(x0), np.array(x1), dt) == pytest.approx(expected, rel=1e-12)
    assert segment_log_density(kernel, np.array(x0), np.array(x1), dt) == pytest.approx(
        expected, rel=1e-12
    )
    # The generic Gaussian path agrees with the closed form.
    generic = LinearGaussian.brownian(speed)
    assert generic.log_density(np.array(x0), np.array(x1), dt) == pytest.approx(
        expected, rel=1e-10
    )


def test_log_density_needs_positive_duration():
    with pytest.raises(PreconditionViolation):
        BrownianIsotropic(1.0).log_density(np.zeros(2), np.ones(2), 0.0)
    with pytest.raises(PreconditionViolation):
        LinearGaussian.brownian(1.0).log_density(np.zeros(2), np.ones(2), -1.0)


def test_brownian_rejects_bad_speed():
    with pytest.raises(PreconditionViolation):
        BrownianIsotropic(0.0)
    with pytest.raises(PreconditionViolation):
        BrownianIsotropic(float("nan"))


def test_ornstein_uhlenbeck_transition():
    theta = 0.3
    sigma2 = 2.0
    mu = np.array([5.0, -1.0])
    kernel = LinearGaussian(-theta * np.eye(2), theta * mu, sigma2 * np.eye(2))
    law = kernel.transition(2.0)
    decay = np.exp(-theta * 2.0)
    np.testing.assert_allclose(law.matrix, decay * np.eye(2), rtol=1e-10)
    np.testing.assert_allclose(law.offset, (1.0 - decay) * mu, rtol=1e-10)
    expected_var = sigma2 / (2.0 * theta) * (1.0 - decay**2)
    np.testing.assert_allclose(law.covariance, expected_var * np.eye(2), rtol=1e-10)


def test_transitions_compose():
    kernel = LinearGaussian(
        np.array([[-0.2, 0.1], [0.0, -0.5]]),
        np.array([0.3, -0.1]),
        np.array([[1.0, 0.2], [0.2, 0.5]]),
    )
    composed = kernel.transition(0.7).then(kernel.transition(1.3))
    direct = kernel.transition(2.0)
    np.testing.assert_allclose(composed.matrix, direct.matrix, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(composed.offset, direct.offset, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(composed.covariance, direct.covariance, rtol=1e-10, atol=1e-12)


def test_degenerate_covariance():
    kernel = LinearGaussian(np.zeros((2, 2)), np.zeros(2), np.zeros((2, 2)))
    with pytest.raises(DegenerateCovariance):
        kernel.log_density(np.zeros(2), np.ones(2), 1.0)


def test_linear_gaussian_validation():
    with pytest.raises(PreconditionViolation):
        LinearGaussian(np.zeros((2, 2)), np.zeros(3), np.eye(2))
    with pytest.raises(PreconditionViolation):
        LinearGaussian(np.zeros((2, 2)), np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(PreconditionViolation):
        LinearGaussian(np.zeros((2, 2)), np.zeros(2), -np.eye(2))


def test_uniform_transition_probs():
    model = three_state_model()
    probs = uniform_transition_probs(model, 0.1, 0.0, None)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(np.diag(probs), 1.0 - 0.04 / 0.1)
    assert probs[0, 1] == pytest.approx(0.2)
    assert out_rate(model, 1, 0.0, None) == pytest.approx(0.04)


def test_uniform_transition_probs_kappa_too_small():
    with pytest.raises(PreconditionViolation, match="exceeds kappa"):
        uniform_transition_probs(three_state_model(), 0.03, 0.0, None)


def test_uniform_transition_probs_without_switching():
    model = ModelSpec((BrownianIsotropic(1.0),), ConstantRates(np.zeros((1, 1))))
    np.testing.assert_array_equal(uniform_transition_probs(model, 0.0, 0.0, None), np.eye(1))


def test_out_rate_checks_state():
    with pytest.raises(PreconditionViolation):
        out_rate(three_state_model(), 3, 0.0, None)


def test_model_spec_defaults():
    model = three_state_model()
    assert model.n == 3
    assert model.dim == 2
    assert model.is_brownian
    np.testing.assert_allclose(model.initial_dist, np.full(3, 1.0 / 3.0))
    np.testing.assert_allclose(model.speeds, [0.5, 3.0, 12.0])
    assert model.rates.param_names == [
        "rate_1_2",
        "rate_1_3",
        "rate_2_1",
        "rate_2_3",
        "rate_3_1",
        "rate_3_2",
    ]


def test_model_spec_validation():
    rates = ConstantRates(np.array([[0.0, 0.1], [0.1, 0.0]]))
    with pytest.raises(PreconditionViolation, match="strictly increasing"):
        ModelSpec((BrownianIsotropic(3.0), BrownianIsotropic(1.0)), rates)
    with pytest.raises(PreconditionViolation, match="sum to 1"):
        ModelSpec((BrownianIsotropic(1.0), BrownianIsotropic(3.0)), rates, [0.5, 0.6])
    with pytest.raises(PreconditionViolation, match="states"):
        ModelSpec((BrownianIsotropic(1.0),), rates)
    with pytest.raises(PreconditionViolation, match="dimension"):
        ModelSpec((BrownianIsotropic(1.0), BrownianIsotropic(3.0, dim=1)), rates)


def test_model_spec_updates():
    model = three_state_model()
    updated = model.with_speeds([1.0, 2.0, 4.0]).with_rate_params(np.arange(1, 7) * 0.01)
    np.testing.assert_allclose(updated.speeds, [1.0, 2.0, 4.0])
    assert updated.rates.rate(2, 1, 0.0, None) == pytest.approx(0.06)
    np.testing.assert_allclose(updated.rates.bounds, model.rates.bounds)
    # The original is untouched.
    np.testing.assert_allclose(model.speeds, [0.5, 3.0, 12.0])


def test_linear_gaussian_model_has_no_speeds():
    model = ModelSpec(
        (LinearGaussian.brownian(1.0), LinearGaussian.brownian(1.0)),
        ConstantRates(np.array([[0.0, 0.1], [0.1, 0.0]])),
    )
    assert model.speeds is None
    with pytest.raises(PreconditionViolation):
        model.with_speeds([1.0, 2.0])


def test_rate_of_own_state_is_undefined():
    with pytest.raises(PreconditionViolation):
        three_state_model().rates.rate(1, 1, 0.0, None)


def test_zero_bounds_fix_rates():
    rates = ConstantRates(np.array([[0.0, 0.1], [0.0, 0.0]]), np.array([[0.0, 0.2], [0.0, 0.0]]))
    assert rates.param_names == ["rate_1_2"]
    np.testing.assert_allclose(rates.params, [0.1])


def test_gaussian_patch_rates():
    peak = np.array([[0.0, 0.2], [0.1, 0.0]])
    rates = GaussianPatchRates(peak, [1.0, 1.0], 2.0)
    assert not rates.homogeneous
    np.testing.assert_allclose(rates.matrix(0.0, np.array([1.0, 1.0])), peak)
    np.testing.assert_allclose(
        rates.matrix(0.0, np.array([3.0, 1.0])), peak * np.exp(-0.5)
    )
    rates.check_bounds(2)
    with pytest.raises(PreconditionViolation):
        rates.matrix(0.0, None)


def test_check_bounds_rejects_rates_above_bounds():
    rates = ConstantRates(np.array([[0.0, 0.2], [0.1, 0.0]]), np.full((2, 2), 0.15))
    with pytest.raises(ConfigError, match="model.rates"):
        rates.check_bounds(2)


def test_create_rate_function():
    options = {"family": "gaussian_patch", "matrix": [[0, 0.1], [0.1, 0]], "centre": [0, 0], "scale": 5}
    rates = create_rate_function(options, 2, 2)
    assert isinstance(rates, GaussianPatchRates)
    assert rates.to_dict()["scale"] == 5.0

    with pytest.raises(ConfigError, match="model.rates.family"):
        create_rate_function({"family": "unknown"}, 2, 2)
    with pytest.raises(ConfigError, match="model.rates.centre"):
        create_rate_function(dict(options, centre=[0, 0, 0]), 2, 2)
    with pytest.raises(ConfigError, match="model.rates.matrix"):
        create_rate_function({"family": "constant", "matrix": [[0, -1], [1, 0]]}, 2, 2)


def test_register_rate_family():
    def factory(options, n, dim):
        return ConstantRates(np.full((n, n), options["level"]))

    register_rate_family("flat-for-test", factory)
    rates = create_rate_function({"family": "flat-for-test", "level": 0.25}, 3, 2)
    assert rates.rate(0, 2, 0.0, None) == 0.25
    assert rates.rate(2, 0, 0.0, None) == 0.25


@pytest.mark.parametrize(
    "kernel",
    [
        BrownianIsotropic(2.0),
        LinearGaussian(
            np.array([[-0.3, 0.1], [0.0, -0.6]]),
            np.array([0.5, -0.2]),
            np.array([[1.5, 0.3], [0.3, 0.8]]),
        ),
    ],
)
def test_segment_density_integrates_to_one(kernel):
    rng = np.random.default_rng(31)
    x0 = np.array([1.0, -2.0])
    dt = 3.0
    law = kernel.transition(dt)
    # Importance sampling from a wider Gaussian around the transition mean.
    proposal = multivariate_normal(mean=law.mean(x0), cov=4.0 * law.covariance)
    points = proposal.rvs(size=20000, random_state=rng)
    log_weights = np.array(
        [segment_log_density(kernel, x0, x1, dt) for x1 in points]
    ) - proposal.logpdf(points)
    weights = np.exp(log_weights)
    se = weights.std() / np.sqrt(len(weights))
    assert abs(weights.mean() - 1.0) < 4 * se
