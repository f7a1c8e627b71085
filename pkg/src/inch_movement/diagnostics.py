# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Effective sample size and efficiency reports.
"""

from __future__ import annotations

import dataclasses
import json
import os
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np
from scipy import fft

from .errors import PreconditionViolation
from .samples import SampleRecord, default_quantities, quantity_series

MIN_SERIES_LENGTH = 10


def autocorrelation(series: np.ndarray) -> np.ndarray:
    """
    Normalized autocorrelation at lags ``0 .. N-1``.
    """
    centred = np.asarray(series, dtype=float) - np.mean(series)
    size = len(centred)
    padded = fft.next_fast_len(2 * size)
    spectrum = fft.rfft(centred, padded)
    autocov = fft.irfft(spectrum * np.conj(spectrum), padded)[:size]
    return autocov / autocov[0]


def ess(series: Sequence[float]) -> float:
    """
    Effective sample size with Geyer's initial positive sequence estimator,
    clamped to ``[1, N]``. A constant series has ESS 1.
    """
    values = np.asarray(series, dtype=float)
    size = len(values)
    if size < MIN_SERIES_LENGTH:
        raise PreconditionViolation(
            "ESS needs at least {0} draws, got {1}".format(MIN_SERIES_LENGTH, size)
        )
    if np.ptp(values) == 0:
        return 1.0
    rho = autocorrelation(values)
    tau = -1.0
    for m in range(size // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(np.clip(size / tau, 1.0, size)) if tau > 0 else float(size)


@dataclasses.dataclass(frozen=True)
class EfficiencyReport:
    """
    Minimum ESS over the monitored quantities relative to run time.
    """

    ess: dict[str, float]
    min_ess: float
    min_quantity: str
    #: Seconds; ``None`` when timing was not recorded.
    wall_time: float | None
    ess_per_second: float | None
    iterations: int
    thin: int
    draws: int
    sampler: str = ""
    acceptance: dict[str, float] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_ess(
        cls,
        ess_values: Mapping[str, float],
        wall_time: float | None,
        *,
        iterations: int = 0,
        thin: int = 1,
        draws: int = 0,
        sampler: str = "",
        acceptance: Mapping[str, float] | None = None,
    ) -> EfficiencyReport:
        if not ess_values:
            raise PreconditionViolation("no quantities to report on")
        if wall_time is not None and not wall_time > 0:
            raise PreconditionViolation("wall time must be positive")
        min_quantity = min(ess_values, key=lambda name: (ess_values[name], name))
        min_ess = float(ess_values[min_quantity])
        return cls(
            ess={name: float(value) for name, value in ess_values.items()},
            min_ess=min_ess,
            min_quantity=min_quantity,
            wall_time=wall_time,
            ess_per_second=None if wall_time is None else min_ess / wall_time,
            iterations=iterations,
            thin=thin,
            draws=draws,
            sampler=sampler,
            acceptance=dict(acceptance or {}),
        )

    @property
    def ess_per_iteration(self) -> float:
        return self.min_ess / self.iterations if self.iterations else 0.0

    @property
    def efficiency(self) -> float:
        """
        ESS per second, or ESS per iteration when timing was not recorded.
        """
        if self.ess_per_second is not None:
            return self.ess_per_second
        return self.ess_per_iteration

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def store(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")


def efficiency_report(
    samples: Sequence[SampleRecord],
    wall_time: float | None,
    quantities: Sequence[str] | None = None,
    **kwargs,
) -> EfficiencyReport:
    """
    ESS of every listed quantity (by default the parameters and any sampled
    occupancies) and the minimum ESS per second.
    """
    series = quantity_series(samples)
    if quantities is None:
        quantities = default_quantities(samples)
    missing = [name for name in quantities if name not in series]
    if missing:
        raise PreconditionViolation("unknown quantities: {0}".format(", ".join(missing)))
    kwargs.setdefault("draws", len(samples))
    return EfficiencyReport.from_ess(
        {name: ess(series[name]) for name in quantities}, wall_time, **kwargs
    )
