# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Posterior draws and the sample CSV format.
"""

from __future__ import annotations

import dataclasses
import os
from collections.abc import Sequence

import numpy as np
import pandas as pd


@dataclasses.dataclass(frozen=True)
class SampleRecord:
    """
    One thinned posterior draw.
    """

    iteration: int
    loglik: float
    speeds: tuple[float, ...]
    rate_params: tuple[float, ...]
    rate_names: tuple[str, ...]
    switch_counts: tuple[int, ...]
    elapsed_s: float
    #: Fraction of the track spent in each state (baseline sampler only).
    occupancy: tuple[float, ...] | None = None

    @property
    def total_switch_count(self) -> int:
        return int(sum(self.switch_counts))

    def columns(self) -> dict[str, float]:
        row: dict[str, float] = {"iter": self.iteration, "loglik": self.loglik}
        for k, speed in enumerate(self.speeds):
            row["v_{0}".format(k + 1)] = speed
        row.update(zip(self.rate_names, self.rate_params))
        row["total_switch_count"] = self.total_switch_count
        row["elapsed_s"] = self.elapsed_s
        if self.occupancy is not None:
            for k, fraction in enumerate(self.occupancy):
                row["occupancy_{0}".format(k + 1)] = fraction
        return row


def samples_frame(samples: Sequence[SampleRecord]) -> pd.DataFrame:
    return pd.DataFrame([sample.columns() for sample in samples])


def write_samples_csv(path: str | os.PathLike, samples: Sequence[SampleRecord]) -> None:
    """
    Write draws as CSV: ``iter, loglik, v_1.., rate_i_j.., total_switch_count,
    elapsed_s`` and, for the baseline sampler, ``occupancy_1..``.
    """
    frame = samples_frame(samples)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def quantity_series(samples: Sequence[SampleRecord]) -> dict[str, np.ndarray]:
    """
    Trace of every recorded quantity, keyed by CSV column name.
    """
    frame = samples_frame(samples)
    return {
        str(column): frame[column].to_numpy(dtype=float)
        for column in frame.columns
        if column not in ("iter", "elapsed_s")
    }


def default_quantities(samples: Sequence[SampleRecord]) -> list[str]:
    """
    Quantities whose minimum ESS measures efficiency: the parameters and,
    where sampled, the behavioural occupancies.
    """
    if not samples:
        return []
    first = samples[0]
    names = ["v_{0}".format(k + 1) for k in range(len(first.speeds))]
    names.extend(first.rate_names)
    if first.occupancy is not None:
        names.extend("occupancy_{0}".format(k + 1) for k in range(len(first.occupancy)))
    return names
