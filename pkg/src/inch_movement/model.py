# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Behavioural states, movement kernels and switching rates of an integrated
continuous-time hidden Markov model.

States are numbered ``0 … n-1``.
"""

from __future__ import annotations

import abc
import dataclasses
from collections.abc import Callable, Mapping, Sequence
from typing import Any

import numpy as np
from scipy.linalg import expm
from scipy.stats import multivariate_normal

from .constants import PROBABILITY_TOLERANCE
from .errors import ConfigError, DegenerateCovariance, PreconditionViolation

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclasses.dataclass(frozen=True, eq=False)
class GaussianTransition:
    """
    Affine Gaussian transition law ``x1 ~ N(matrix @ x0 + offset, covariance)``.
    """

    matrix: np.ndarray
    offset: np.ndarray
    covariance: np.ndarray

    @property
    def dim(self) -> int:
        return self.offset.shape[0]

    def then(self, other: GaussianTransition) -> GaussianTransition:
        """
        Compose this transition with ``other`` applied afterwards.
        """
        return GaussianTransition(
            other.matrix @ self.matrix,
            other.matrix @ self.offset + other.offset,
            other.matrix @ self.covariance @ other.matrix.T + other.covariance,
        )

    def mean(self, x0: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x0, dtype=float) + self.offset

    def log_density(self, x0: np.ndarray, x1: np.ndarray) -> float:
        """
        Log density of ``x1`` given ``x0``.

        :raises DegenerateCovariance: the covariance is not positive definite
        """
        try:
            value = multivariate_normal.logpdf(
                np.asarray(x1, dtype=float), mean=self.mean(x0), cov=self.covariance
            )
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise DegenerateCovariance(
                "transition covariance is not positive definite: {0}".format(exc)
            ) from exc
        return float(np.squeeze(value))


class MovementKernel(abc.ABC):
    """
    Movement process followed while in one behavioural state.
    """

    dim: int

    @abc.abstractmethod
    def transition(self, dt: float) -> GaussianTransition:
        """
        Exact transition law over a time span ``dt``.
        """

    @abc.abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """
        Serialize the kernel to its configuration form.
        """

    def log_density(self, x0: np.ndarray, x1: np.ndarray, dt: float) -> float:
        """
        Log density of moving from ``x0`` to ``x1`` in time ``dt``.
        """
        if not dt > 0:
            raise PreconditionViolation(
                "segment duration must be positive, got {0!r}".format(dt)
            )
        return self.transition(dt).log_density(x0, x1)

    def sample(
        self, x0: np.ndarray, dt: float, rng: np.random.Generator
    ) -> np.ndarray:
        """
        Draw the location after ``dt`` starting from ``x0``.
        """
        law = self.transition(dt)
        return rng.multivariate_normal(law.mean(x0), law.covariance)


@dataclasses.dataclass(frozen=True, eq=False)
class BrownianIsotropic(MovementKernel):
    """
    Isotropic Brownian motion with diffusion parameter ``speed``
    (squared distance per unit time).
    """

    speed: float
    dim: int = 2

    def __post_init__(self):
        if not (np.isfinite(self.speed) and self.speed > 0):
            raise PreconditionViolation(
                "Brownian speed must be positive, got {0!r}".format(self.speed)
            )
        if self.dim < 1:
            raise PreconditionViolation("dimension must be at least 1")

    def transition(self, dt: float) -> GaussianTransition:
        dim = self.dim
        return GaussianTransition(
            np.eye(dim), np.zeros(dim), np.eye(dim) * (dt * self.speed)
        )

    def log_density(self, x0: np.ndarray, x1: np.ndarray, dt: float) -> float:
        if not dt > 0:
            raise PreconditionViolation(
                "segment duration must be positive, got {0!r}".format(dt)
            )
        variance = dt * self.speed
        if not variance > 0:
            raise DegenerateCovariance(
                "variance {0!r} * {1!r} underflows".format(dt, self.speed)
            )
        delta = np.asarray(x1, dtype=float) - np.asarray(x0, dtype=float)
        return float(
            -0.5 * self.dim * (_LOG_2PI + np.log(variance))
            - 0.5 * float(delta @ delta) / variance
        )

    def sample(
        self, x0: np.ndarray, dt: float, rng: np.random.Generator
    ) -> np.ndarray:
        scale = np.sqrt(dt * self.speed)
        return np.asarray(x0, dtype=float) + scale * rng.standard_normal(self.dim)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "brownian", "speed": float(self.speed)}


@dataclasses.dataclass(frozen=True, eq=False)
class LinearGaussian(MovementKernel):
    """
    Solution of the linear SDE ``dX = (drift @ X + offset) dt + diffusion^(1/2) dW``.
    """

    drift: np.ndarray
    offset: np.ndarray
    diffusion: np.ndarray

    def __post_init__(self):
        drift = np.atleast_2d(np.asarray(self.drift, dtype=float))
        offset = np.atleast_1d(np.asarray(self.offset, dtype=float))
        diffusion = np.atleast_2d(np.asarray(self.diffusion, dtype=float))
        dim = offset.shape[0]
        if drift.shape != (dim, dim) or diffusion.shape != (dim, dim):
            raise PreconditionViolation(
                "drift and diffusion must be {0}x{0} matrices".format(dim)
            )
        if not np.allclose(diffusion, diffusion.T):
            raise PreconditionViolation("diffusion matrix must be symmetric")
        scale = max(1.0, float(np.abs(diffusion).max()))
        if np.linalg.eigvalsh(diffusion).min() < -1e-12 * scale:
            raise PreconditionViolation(
                "diffusion matrix must be positive semi-definite"
            )
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "diffusion", diffusion)
        object.__setattr__(self, "dim", dim)

    @classmethod
    def brownian(cls, speed: float, dim: int = 2) -> LinearGaussian:
        """
        Linear-SDE form of isotropic Brownian motion.
        """
        return cls(np.zeros((dim, dim)), np.zeros(dim), np.eye(dim) * speed)

    def transition(self, dt: float) -> GaussianTransition:
        dim = self.dim
        if not np.any(self.drift):
            return GaussianTransition(
                np.eye(dim), self.offset * dt, self.diffusion * dt
            )
        matrix = expm(self.drift * dt)
        # Integrated offset from the augmented system [[A, b], [0, 0]].
        augmented = np.zeros((dim + 1, dim + 1))
        augmented[:dim, :dim] = self.drift
        augmented[:dim, dim] = self.offset
        offset = expm(augmented * dt)[:dim, dim]
        # Van Loan block exponential for the integrated covariance.
        block = np.zeros((2 * dim, 2 * dim))
        block[:dim, :dim] = -self.drift
        block[:dim, dim:] = self.diffusion
        block[dim:, dim:] = self.drift.T
        exp_block = expm(block * dt)
        covariance = exp_block[dim:, dim:].T @ exp_block[:dim, dim:]
        return GaussianTransition(matrix, offset, 0.5 * (covariance + covariance.T))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "linear_gaussian",
            "drift": self.drift.tolist(),
            "offset": self.offset.tolist(),
            "diffusion": self.diffusion.tolist(),
        }


class RateFunction(abc.ABC):
    """
    Switching rates ``lambda_ij(t, x)`` with prior upper bounds ``u_ij``.

    The free parameters are the entries selected by :attr:`param_mask`; each
    of them has the prior ``Uniform(0, u_ij)``.
    """

    n: int
    bounds: np.ndarray

    #: ``True`` if the rates do not depend on location.
    homogeneous: bool = True

    @abc.abstractmethod
    def matrix(self, t: float, x: np.ndarray | None) -> np.ndarray:
        """
        ``n x n`` matrix of switching rates at ``(t, x)`` with zero diagonal.
        """

    @property
    @abc.abstractmethod
    def params(self) -> np.ndarray:
        """
        Current values of the free parameters.
        """

    @abc.abstractmethod
    def with_params(self, params: np.ndarray) -> RateFunction:
        """
        Copy of this rate function with different free parameters.
        """

    @abc.abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """
        Serialize the rate function to its configuration form.
        """

    @property
    def param_mask(self) -> np.ndarray:
        mask = self.bounds > 0
        np.fill_diagonal(mask, False)
        return mask

    @property
    def param_bounds(self) -> np.ndarray:
        return self.bounds[self.param_mask]

    @property
    def param_names(self) -> list[str]:
        rows, cols = np.nonzero(self.param_mask)
        return [
            "rate_{0}_{1}".format(i + 1, j + 1) for i, j in zip(rows, cols)
        ]

    def rate(self, i: int, j: int, t: float, x: np.ndarray | None) -> float:
        """
        Rate of switching from state ``i`` to state ``j != i``.
        """
        if i == j:
            raise PreconditionViolation("lambda_ii is not defined")
        return float(self.matrix(t, x)[i, j])

    def check_bounds(self, dim: int, samples: int = 64) -> None:
        """
        Check ``0 <= lambda_ij(t, x) <= u_ij`` at pseudo-random ``(t, x)``.

        :raises ConfigError: a sampled rate is negative or above its bound
        """
        rng = np.random.default_rng(12345)
        times = rng.uniform(0.0, 1e4, size=samples)
        points = rng.normal(scale=1e3, size=(samples, dim))
        points[: samples // 2] *= 1e-3
        tolerance = 1e-12 * max(1.0, float(self.bounds.max(initial=0.0)))
        for t, x in zip(times, points):
            rates = self.matrix(float(t), x)
            if np.any(rates < 0) or np.any(rates > self.bounds + tolerance):
                raise ConfigError(
                    "rates at t={0:g} violate 0 <= lambda_ij <= u_ij".format(t),
                    field="model.rates",
                )


def _square_matrix(value: Any, n: int, field: str) -> np.ndarray:
    try:
        result = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError("must be a numeric matrix", field=field) from exc
    if result.shape != (n, n):
        raise ConfigError("must be a {0}x{0} matrix".format(n), field=field)
    result = result.copy()
    np.fill_diagonal(result, 0.0)
    if np.any(np.isnan(result)) or np.any(result < 0):
        raise ConfigError("entries must be non-negative", field=field)
    return result


class ConstantRates(RateFunction):
    """
    Rates that depend on neither time nor location.
    """

    homogeneous = True

    def __init__(self, rates: Any, bounds: Any | None = None):
        rates = np.asarray(rates, dtype=float)
        n = rates.shape[0]
        self.n = n
        self._rates = _square_matrix(rates, n, "model.rates.matrix")
        self.bounds = (
            self._rates.copy()
            if bounds is None
            else _square_matrix(bounds, n, "model.rates.bounds")
        )

    def matrix(self, t: float, x: np.ndarray | None) -> np.ndarray:
        return self._rates

    @property
    def params(self) -> np.ndarray:
        return self._rates[self.param_mask]

    def with_params(self, params: np.ndarray) -> ConstantRates:
        rates = np.zeros_like(self._rates)
        rates[self.param_mask] = params
        return ConstantRates(rates, self.bounds)

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": "constant",
            "matrix": self._rates.tolist(),
            "bounds": self.bounds.tolist(),
        }


class GaussianPatchRates(RateFunction):
    """
    Rates peaking at ``centre`` and decaying with squared distance:
    ``lambda_ij(t, x) = peak_ij * exp(-|x - centre|^2 / (2 scale^2))``.
    """

    homogeneous = False

    def __init__(
        self, peak: Any, centre: Any, scale: float, bounds: Any | None = None
    ):
        peak = np.asarray(peak, dtype=float)
        n = peak.shape[0]
        self.n = n
        self._peak = _square_matrix(peak, n, "model.rates.matrix")
        self.bounds = (
            self._peak.copy()
            if bounds is None
            else _square_matrix(bounds, n, "model.rates.bounds")
        )
        self.centre = np.atleast_1d(np.asarray(centre, dtype=float))
        if not (np.isfinite(scale) and scale > 0):
            raise ConfigError("must be positive", field="model.rates.scale")
        self.scale = float(scale)

    def matrix(self, t: float, x: np.ndarray | None) -> np.ndarray:
        if x is None:
            raise PreconditionViolation("location-dependent rates need a location")
        delta = np.asarray(x, dtype=float) - self.centre
        return self._peak * np.exp(-0.5 * float(delta @ delta) / self.scale**2)

    @property
    def params(self) -> np.ndarray:
        return self._peak[self.param_mask]

    def with_params(self, params: np.ndarray) -> GaussianPatchRates:
        peak = np.zeros_like(self._peak)
        peak[self.param_mask] = params
        return GaussianPatchRates(peak, self.centre, self.scale, self.bounds)

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": "gaussian_patch",
            "matrix": self._peak.tolist(),
            "bounds": self.bounds.tolist(),
            "centre": self.centre.tolist(),
            "scale": self.scale,
        }


RateFamilyFactory = Callable[[Mapping[str, Any], int, int], RateFunction]

_RATE_FAMILIES: dict[str, RateFamilyFactory] = {}


def register_rate_family(name: str, factory: RateFamilyFactory) -> None:
    """
    Register a named rate family usable from configuration files.

    :arg name: Value of ``model.rates.family``
    :arg factory: Called with the ``model.rates`` mapping, the number of states
                  and the spatial dimension; returns a :class:`RateFunction`.
    """
    _RATE_FAMILIES[name] = factory


def create_rate_function(options: Mapping[str, Any], n: int, dim: int) -> RateFunction:
    """
    Build a rate function from its configuration mapping.
    """
    family = options.get("family", "constant")
    factory = _RATE_FAMILIES.get(family)
    if factory is None:
        raise ConfigError(
            "unknown rate family {0!r}; known: {1}".format(
                family, ", ".join(sorted(_RATE_FAMILIES))
            ),
            field="model.rates.family",
        )
    rates = factory(options, n, dim)
    if rates.n != n:
        raise ConfigError(
            "rate family produced {0} states, expected {1}".format(rates.n, n),
            field="model.rates",
        )
    return rates


def _constant_factory(options: Mapping[str, Any], n: int, dim: int) -> RateFunction:
    if "matrix" not in options:
        raise ConfigError("missing", field="model.rates.matrix")
    return ConstantRates(
        _square_matrix(options["matrix"], n, "model.rates.matrix"),
        options.get("bounds"),
    )


def _gaussian_patch_factory(
    options: Mapping[str, Any], n: int, dim: int
) -> RateFunction:
    for key in ("matrix", "centre", "scale"):
        if key not in options:
            raise ConfigError("missing", field="model.rates.{0}".format(key))
    centre = np.atleast_1d(np.asarray(options["centre"], dtype=float))
    if centre.shape != (dim,):
        raise ConfigError(
            "must have {0} coordinates".format(dim), field="model.rates.centre"
        )
    return GaussianPatchRates(
        _square_matrix(options["matrix"], n, "model.rates.matrix"),
        centre,
        float(options["scale"]),
        options.get("bounds"),
    )


register_rate_family("constant", _constant_factory)
register_rate_family("gaussian_patch", _gaussian_patch_factory)


@dataclasses.dataclass(frozen=True, eq=False)
class ModelSpec:
    """
    An InCH process: ``n`` behavioural states, one movement kernel per
    state, switching rates and the initial behaviour distribution.

    Immutable; parameter updates create new instances.
    """

    kernels: tuple[MovementKernel, ...]
    rates: RateFunction
    initial_dist: np.ndarray | None = None

    def __post_init__(self):
        kernels = tuple(self.kernels)
        object.__setattr__(self, "kernels", kernels)
        if not kernels:
            raise PreconditionViolation("a model needs at least one state")
        n = len(kernels)
        dims = {kernel.dim for kernel in kernels}
        if len(dims) != 1:
            raise PreconditionViolation("all kernels must share one dimension")
        if self.rates.n != n:
            raise PreconditionViolation(
                "rates describe {0} states, kernels {1}".format(self.rates.n, n)
            )
        if self.initial_dist is None:
            initial = np.full(n, 1.0 / n)
        else:
            initial = np.asarray(self.initial_dist, dtype=float)
        if initial.shape != (n,) or np.any(initial < 0):
            raise PreconditionViolation(
                "initial distribution must be {0} non-negative numbers".format(n)
            )
        if abs(initial.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise PreconditionViolation("initial distribution must sum to 1")
        object.__setattr__(self, "initial_dist", initial)
        speeds = self.speeds
        if speeds is not None and np.any(np.diff(speeds) <= 0):
            raise PreconditionViolation(
                "Brownian speeds must be strictly increasing, got {0}".format(
                    speeds.tolist()
                )
            )

    @property
    def n(self) -> int:
        return len(self.kernels)

    @property
    def dim(self) -> int:
        return self.kernels[0].dim

    @property
    def is_brownian(self) -> bool:
        return all(isinstance(kernel, BrownianIsotropic) for kernel in self.kernels)

    @property
    def speeds(self) -> np.ndarray | None:
        """
        Diffusion parameters if every kernel is isotropic Brownian motion.
        """
        if not self.is_brownian:
            return None
        return np.array([kernel.speed for kernel in self.kernels])  # type: ignore

    @property
    def log_initial(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.initial_dist)  # type: ignore[arg-type]

    def with_speeds(self, speeds: Sequence[float]) -> ModelSpec:
        """
        Copy of a Brownian model with different speeds.
        """
        if not self.is_brownian:
            raise PreconditionViolation("speeds are only defined for Brownian models")
        kernels = tuple(
            BrownianIsotropic(float(speed), self.dim) for speed in speeds
        )
        return dataclasses.replace(self, kernels=kernels)

    def with_rate_params(self, params: np.ndarray) -> ModelSpec:
        return dataclasses.replace(self, rates=self.rates.with_params(params))


def out_rate(model: ModelSpec, i: int, t: float, x: np.ndarray | None) -> float:
    """
    Rate of switching out of state ``i`` at time ``t`` and location ``x``.
    """
    if not 0 <= i < model.n:
        raise PreconditionViolation(
            "state {0} outside 0..{1}".format(i, model.n - 1)
        )
    return float(model.rates.matrix(t, x)[i].sum())


def uniform_transition_probs(
    model: ModelSpec, kappa: float, t: float, x: np.ndarray | None
) -> np.ndarray:
    """
    Transition matrix of the uniformized chain at a potential switch:
    ``p_ij = lambda_ij / kappa`` and ``p_ii = 1 - lambda_i / kappa``.

    :raises PreconditionViolation: an out-rate exceeds ``kappa``
    """
    rates = model.rates.matrix(t, x)
    out = rates.sum(axis=1)
    if kappa <= 0:
        if np.any(out > 0):
            raise PreconditionViolation(
                "kappa={0!r} cannot dominate positive rates".format(kappa)
            )
        return np.eye(model.n)
    if np.any(out > kappa * (1.0 + PROBABILITY_TOLERANCE)):
        raise PreconditionViolation(
            "out-rate {0!r} exceeds kappa={1!r}; kappa was chosen too small".format(
                float(out.max()), kappa
            )
        )
    probs = rates / kappa
    np.fill_diagonal(probs, np.clip(1.0 - out / kappa, 0.0, 1.0))
    return probs


def segment_log_density(
    kernel: MovementKernel, x0: np.ndarray, x1: np.ndarray, dt: float
) -> float:
    """
    Log density of the movement ``x0 -> x1`` over ``dt`` under ``kernel``.
    """
    return kernel.log_density(x0, x1, dt)
