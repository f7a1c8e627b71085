# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Configuration classes for models, priors, tuning, runs and simulations.
"""

from __future__ import annotations

import copy
import enum
import json
import os
from collections.abc import Mapping
from typing import Any

import numpy as np
from antsibull_fileutils.yaml import load_yaml_file, store_yaml_file

from .constants import DEFAULT_SEQUENCE_GUARD
from .diagnostics import MIN_SERIES_LENGTH
from .errors import ConfigError, InchError, PreconditionViolation
from .logger import LOGGER
from .model import (
    BrownianIsotropic,
    LinearGaussian,
    ModelSpec,
    MovementKernel,
    create_rate_function,
)
from .uniformization import choose_kappa

SAMPLERS = ("inch-hom", "inch-het", "baseline")

SECTIONS = ("model", "priors", "tuning", "run", "simulate", "tuning_grid")

TUNING_KEYS = (
    "omega",
    "p_mix",
    "max_block",
    "resample_frac",
    "speed_step",
    "rate_step",
    "update_params",
)


class TextFormat(enum.Enum):
    """
    Supported text formats for reports.
    """

    RESTRUCTURED_TEXT = "restructuredtext"
    MARKDOWN = "markdown"

    def to_extension(self) -> str:
        """
        Convert a text format to the associated extension (without leading dot).
        """
        if self == TextFormat.RESTRUCTURED_TEXT:
            return "rst"
        if self == TextFormat.MARKDOWN:
            return "md"
        raise ValueError(f"Unknown text format {self}")

    @staticmethod
    def from_extension(extension: str) -> TextFormat:
        """
        Convert a file extension (without leading dot) to the corresponding text format.
        """
        if extension == "rst":
            return TextFormat.RESTRUCTURED_TEXT
        if extension == "md":
            return TextFormat.MARKDOWN
        raise ValueError(f"Unknown extension {extension!r}")


def _number(
    value: Any,
    field: str,
    *,
    integer: bool = False,
    positive: bool = False,
    minimum: float | None = None,
    maximum: float | None = None,
) -> Any:
    if isinstance(value, bool):
        raise ConfigError("must be a number, not a boolean", field=field)
    try:
        # YAML 1.1 reads exponent-only floats such as 1e-3 as strings.
        number = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError("must be a number, got {0!r}".format(value), field=field) from exc
    if not np.isfinite(number):
        raise ConfigError("must be finite", field=field)
    if integer:
        if number != int(number):
            raise ConfigError("must be an integer", field=field)
        number = int(number)
    if positive and not number > 0:
        raise ConfigError("must be positive", field=field)
    if minimum is not None and number < minimum:
        raise ConfigError("must be at least {0}".format(minimum), field=field)
    if maximum is not None and number > maximum:
        raise ConfigError("must be at most {0}".format(maximum), field=field)
    return number


def _bool(value: Any, field: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError("must be true or false", field=field)
    return value


def _mapping(value: Any, field: str) -> Mapping[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError("must be a mapping", field=field)
    return value


class ModelConfig:
    """
    The ``model`` section.
    """

    config: Mapping[str, Any]
    n_states: int
    dim: int
    time_unit: str
    kernels: list[Mapping[str, Any]]
    rates: Mapping[str, Any]
    initial_dist: list[float] | None

    def __init__(self, config: Mapping[str, Any]):
        self.config = config
        self.n_states = _number(
            self.config.get("n_states", 3), "model.n_states", integer=True, minimum=1
        )
        self.dim = _number(self.config.get("dim", 2), "model.dim", integer=True, minimum=1)
        self.time_unit = str(self.config.get("time_unit", "minutes"))
        self.kernels = list(self.config.get("kernels") or [])
        self.rates = _mapping(self.config.get("rates"), "model.rates")
        self.initial_dist = self.config.get("initial_dist")
        self._validate_config()

    def _validate_config(self) -> None:
        if len(self.kernels) != self.n_states:
            raise ConfigError(
                "must list {0} kernels, got {1}".format(self.n_states, len(self.kernels)),
                field="model.kernels",
            )
        if self.initial_dist is not None and len(self.initial_dist) != self.n_states:
            raise ConfigError(
                "must have {0} entries".format(self.n_states), field="model.initial_dist"
            )

    def _build_kernel(self, index: int, options: Any) -> MovementKernel:
        field = "model.kernels[{0}]".format(index)
        options = _mapping(options, field)
        kind = options.get("kind", "brownian")
        try:
            if kind == "brownian":
                speed = _number(options.get("speed"), field + ".speed", positive=True)
                return BrownianIsotropic(speed, self.dim)
            if kind == "linear_gaussian":
                dim = self.dim
                return LinearGaussian(
                    np.asarray(options.get("drift", np.zeros((dim, dim))), dtype=float),
                    np.asarray(options.get("offset", np.zeros(dim)), dtype=float),
                    np.asarray(options.get("diffusion"), dtype=float),
                )
        except (PreconditionViolation, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field=field) from exc
        raise ConfigError(
            "unknown kernel kind {0!r}; use brownian or linear_gaussian".format(kind),
            field=field + ".kind",
        )

    def build(self) -> ModelSpec:
        """
        Construct and validate the model.
        """
        kernels = [self._build_kernel(k, options) for k, options in enumerate(self.kernels)]
        rates = create_rate_function(self.rates, self.n_states, self.dim)
        rates.check_bounds(self.dim)
        try:
            return ModelSpec(tuple(kernels), rates, self.initial_dist)
        except PreconditionViolation as exc:
            raise ConfigError(str(exc), field="model") from exc


class PriorConfig:
    """
    The ``priors`` section.
    """

    speed_max: float

    def __init__(self, config: Mapping[str, Any]):
        self.speed_max = _number(
            config.get("speed_max", 50.0), "priors.speed_max", positive=True
        )


class TuningConfig:
    """
    The ``tuning`` section.
    """

    values: dict[str, Any]

    def __init__(self, config: Mapping[str, Any]):
        self.values = {
            "omega": _number(config.get("omega", 1.0), "tuning.omega", positive=True),
            "p_mix": _number(
                config.get("p_mix", 0.5), "tuning.p_mix", minimum=0.0, maximum=1.0
            ),
            "max_block": _number(
                config.get("max_block", 5), "tuning.max_block", integer=True, minimum=1
            ),
            "resample_frac": _number(
                config.get("resample_frac", 0.1),
                "tuning.resample_frac",
                positive=True,
                maximum=1.0,
            ),
            "speed_step": _number(
                config.get("speed_step", 0.1), "tuning.speed_step", minimum=0.0
            ),
            "rate_step": _number(
                config.get("rate_step", 0.2), "tuning.rate_step", minimum=0.0
            ),
            "update_params": _bool(
                config.get("update_params", True), "tuning.update_params"
            ),
        }
        unknown = sorted(set(config) - set(TUNING_KEYS))
        if unknown:
            raise ConfigError(
                "unknown keys {0}".format(", ".join(unknown)), field="tuning"
            )


class RunSettings:
    """
    The ``run`` section.
    """

    sampler: str
    iterations: int
    burn_in: int
    thin: int
    seed: int
    kappa: float | str
    nominal_interval: float
    guard: int
    record_timing: bool
    debug: bool
    log_every: int
    report_format: TextFormat

    def __init__(self, config: Mapping[str, Any]):
        self.sampler = config.get("sampler", "inch-hom")
        self.iterations = _number(
            config.get("iterations", 100000), "run.iterations", integer=True, minimum=0
        )
        self.burn_in = _number(
            config.get("burn_in", 10000), "run.burn_in", integer=True, minimum=0
        )
        self.thin = _number(config.get("thin", 100), "run.thin", integer=True, minimum=1)
        self.seed = _number(config.get("seed", 0), "run.seed", integer=True, minimum=0)
        kappa = config.get("kappa", "nominal")
        if kappa not in ("nominal", "bounds"):
            kappa = _number(kappa, "run.kappa", positive=True)
        self.kappa = kappa
        self.nominal_interval = _number(
            config.get("nominal_interval", 10.0), "run.nominal_interval", positive=True
        )
        self.guard = _number(
            config.get("guard", DEFAULT_SEQUENCE_GUARD), "run.guard", integer=True, minimum=1
        )
        self.record_timing = _bool(config.get("record_timing", True), "run.record_timing")
        self.debug = _bool(config.get("debug", False), "run.debug")
        self.log_every = _number(
            config.get("log_every", 10000), "run.log_every", integer=True, minimum=0
        )
        try:
            self.report_format = TextFormat.from_extension(
                config.get("report_format", "rst")
            )
        except ValueError as exc:
            raise ConfigError("must be rst or md", field="run.report_format") from exc
        self._validate_config()

    def _validate_config(self) -> None:
        if self.sampler not in SAMPLERS:
            raise ConfigError(
                "must be one of {0}, got {1!r}".format(", ".join(SAMPLERS), self.sampler),
                field="run.sampler",
            )
        if self.iterations < self.burn_in:
            raise ConfigError(
                "must not be smaller than run.burn_in ({0})".format(self.burn_in),
                field="run.iterations",
            )
        self.check_draws(self.iterations)

    def burn_in_for(self, iterations: int) -> int:
        """
        Burn-in for a run of ``iterations``: the configured one, or a tenth
        of the run when the configured burn-in would leave no draws.
        """
        if self.burn_in < iterations:
            return self.burn_in
        return iterations // 10

    def kept_draws(self, iterations: int) -> int:
        return (iterations - self.burn_in_for(iterations)) // self.thin

    def check_draws(self, iterations: int) -> None:
        """
        :raises ConfigError: a run of ``iterations`` keeps too few draws for
            the effective sample size
        """
        draws = self.kept_draws(iterations)
        if draws < MIN_SERIES_LENGTH:
            raise ConfigError(
                "{0} iterations keep {1} draws after burn-in and thinning,"
                " at least {2} are needed".format(iterations, draws, MIN_SERIES_LENGTH),
                field="run.iterations",
            )


class SimulationConfig:
    """
    The ``simulate`` section.
    """

    n_obs: int
    interval_choices: list[float]
    drop_prob: float
    start_location: list[float] | None
    initial_state: int
    true_speeds: list[float] | None
    true_rates: list[list[float]] | None

    def __init__(self, config: Mapping[str, Any]):
        self.n_obs = _number(config.get("n_obs", 61), "simulate.n_obs", integer=True, minimum=2)
        choices = config.get("interval_choices", [9, 11])
        if not isinstance(choices, list) or not choices:
            raise ConfigError("must be a non-empty list", field="simulate.interval_choices")
        self.interval_choices = [
            _number(value, "simulate.interval_choices[{0}]".format(k), positive=True)
            for k, value in enumerate(choices)
        ]
        self.drop_prob = _number(
            config.get("drop_prob", 0.0), "simulate.drop_prob", minimum=0.0, maximum=0.9
        )
        self.start_location = config.get("start_location")
        self.initial_state = _number(
            config.get("initial_state", 1), "simulate.initial_state", integer=True, minimum=1
        )
        self.true_speeds = config.get("true_speeds")
        self.true_rates = config.get("true_rates")

    def true_model(self, model: ModelSpec) -> ModelSpec:
        """
        Model with the configured true parameters substituted.
        """
        if self.initial_state > model.n:
            raise ConfigError(
                "must be at most {0}".format(model.n), field="simulate.initial_state"
            )
        try:
            if self.true_speeds is not None:
                model = model.with_speeds(
                    [_number(v, "simulate.true_speeds", positive=True) for v in self.true_speeds]
                )
            if self.true_rates is not None:
                matrix = np.asarray(self.true_rates, dtype=float)
                if matrix.shape != (model.n, model.n):
                    raise ConfigError(
                        "must be a {0}x{0} matrix".format(model.n),
                        field="simulate.true_rates",
                    )
                model = model.with_rate_params(matrix[model.rates.param_mask])
        except PreconditionViolation as exc:
            raise ConfigError(str(exc), field="simulate") from exc
        return model

    def start(self, dim: int) -> np.ndarray:
        if self.start_location is None:
            return np.zeros(dim)
        location = np.asarray(self.start_location, dtype=float)
        if location.shape != (dim,):
            raise ConfigError(
                "must have {0} coordinates".format(dim), field="simulate.start_location"
            )
        return location


class RunConfig:
    # pylint: disable=too-many-instance-attributes
    """
    Complete configuration of a simulation, fit or benchmark.
    """

    config: dict
    model: ModelConfig
    priors: PriorConfig
    tuning: TuningConfig
    run: RunSettings
    simulate: SimulationConfig
    tuning_grid: dict[str, list[Any]]

    def __init__(self, config: dict):
        """
        Create run config from dictionary.
        """
        if not isinstance(config, dict):
            raise ConfigError("configuration must be a mapping")
        self.config = config
        self.model = ModelConfig(_mapping(config.get("model"), "model"))
        self.priors = PriorConfig(_mapping(config.get("priors"), "priors"))
        self.tuning = TuningConfig(_mapping(config.get("tuning"), "tuning"))
        self.run = RunSettings(_mapping(config.get("run"), "run"))
        self.simulate = SimulationConfig(_mapping(config.get("simulate"), "simulate"))
        grid = _mapping(config.get("tuning_grid"), "tuning_grid")
        self.tuning_grid = {key: list(values) for key, values in grid.items()}
        self._validate_config()

    def _validate_config(self) -> None:
        unknown = sorted(set(self.config) - set(SECTIONS))
        if unknown:
            raise ConfigError("unknown sections {0}".format(", ".join(unknown)))
        for key, values in self.tuning_grid.items():
            if key not in TUNING_KEYS:
                raise ConfigError("unknown tuning key", field="tuning_grid.{0}".format(key))
            if not values:
                raise ConfigError("must list candidates", field="tuning_grid.{0}".format(key))

    def resolve_kappa(self, model: ModelSpec) -> float:
        """
        Uniformization rate for ``model`` from ``run.kappa``.

        :raises ConfigError: kappa is below the bound-implied minimum
        """
        try:
            minimum = choose_kappa(model)
        except InchError as exc:
            raise ConfigError(str(exc), field="model.rates.bounds") from exc
        if self.run.kappa == "nominal":
            kappa = 1.0 / self.run.nominal_interval
        elif self.run.kappa == "bounds":
            kappa = minimum
        else:
            kappa = float(self.run.kappa)
        if kappa < minimum * (1.0 - 1e-12):
            raise ConfigError(
                "{0!r} is below the largest bounded out-rate {1!r}".format(kappa, minimum),
                field="run.kappa",
            )
        LOGGER.info("using kappa={0!r} ({1})", kappa, self.run.kappa)
        return kappa

    def store(self, path: str | os.PathLike) -> None:
        """
        Store the configuration file to disk.
        """
        if str(path).endswith(".json"):
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(self.config, handle, indent=2, sort_keys=True)
                handle.write("\n")
            return
        store_yaml_file(path, self.config)

    @staticmethod
    def load(path: str | os.PathLike) -> RunConfig:
        """
        Load a configuration file (YAML, or JSON for ``.json`` files).
        """
        try:
            if str(path).endswith(".json"):
                with open(path, "r", encoding="utf-8") as handle:
                    config = json.load(handle)
            else:
                config = load_yaml_file(path)
        except Exception as exc:  # pylint: disable=broad-except
            raise ConfigError("cannot read {0}: {1}".format(path, exc)) from exc
        if not isinstance(config, dict):
            raise ConfigError("{0} must be a dictionary".format(path))
        return RunConfig(config)

    @staticmethod
    def default() -> RunConfig:
        """
        Create the default three-state configuration.
        """
        return RunConfig(copy.deepcopy(DEFAULT_CONFIG))


def _rate_matrix(off_diagonal: float, n: int) -> list[list[float]]:
    return [[0.0 if i == j else off_diagonal for j in range(n)] for i in range(n)]


DEFAULT_CONFIG: dict[str, Any] = {
    "model": {
        "n_states": 3,
        "dim": 2,
        "time_unit": "minutes",
        "kernels": [
            {"kind": "brownian", "speed": 0.5},
            {"kind": "brownian", "speed": 3.0},
            {"kind": "brownian", "speed": 12.0},
        ],
        "rates": {
            "family": "constant",
            "matrix": _rate_matrix(0.02, 3),
            "bounds": _rate_matrix(0.05, 3),
        },
    },
    "priors": {"speed_max": 50.0},
    "tuning": {
        "omega": 1.0,
        "p_mix": 0.5,
        "max_block": 5,
        "resample_frac": 0.1,
        "speed_step": 0.1,
        "rate_step": 0.2,
        "update_params": True,
    },
    "run": {
        "sampler": "inch-hom",
        "iterations": 100000,
        "burn_in": 10000,
        "thin": 100,
        "seed": 0,
        "kappa": "nominal",
        "nominal_interval": 10.0,
        "guard": DEFAULT_SEQUENCE_GUARD,
        "record_timing": True,
        "debug": False,
        "log_every": 10000,
        "report_format": "rst",
    },
    "simulate": {
        "n_obs": 61,
        "interval_choices": [9, 11],
        "drop_prob": 0.05,
        "start_location": [0.0, 0.0],
        "initial_state": 1,
    },
    "tuning_grid": {
        "resample_frac": [0.05, 0.1, 0.2],
        "speed_step": [0.05, 0.1, 0.2],
    },
}
