# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Observation tracks: reading and writing location fixes.
"""

from __future__ import annotations

import dataclasses
import os
import re

import numpy as np
import pandas as pd

from .errors import NonMonotoneTime, ParseError
from .logger import LOGGER

_TIME_UNIT_RE = re.compile(r"^#\s*time_unit\s*:\s*(\S+)\s*$")
_COORD_RE = re.compile(r"^x([1-9][0-9]*)$")

DEFAULT_TIME_UNIT = "minutes"


@dataclasses.dataclass(frozen=True, eq=False)
class ObservationTrack:
    """
    Strictly increasing observation times with one location fix each.
    """

    times: np.ndarray
    locations: np.ndarray
    time_unit: str = DEFAULT_TIME_UNIT

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        locations = np.asarray(self.locations, dtype=float)
        if locations.ndim == 1:
            locations = locations[:, np.newaxis]
        if times.ndim != 1 or locations.ndim != 2 or len(locations) != len(times):
            raise ParseError("times and locations must have one row per observation")
        if len(times) < 2:
            raise ParseError("a track needs at least two observations")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(locations))):
            raise ParseError("times and locations must be finite")
        steps = np.diff(times)
        if np.any(steps <= 0):
            index = int(np.argmax(steps <= 0))
            raise NonMonotoneTime(
                "time {0!r} does not follow {1!r}".format(
                    float(times[index + 1]), float(times[index])
                )
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "locations", locations)

    @property
    def n_obs(self) -> int:
        return len(self.times)

    @property
    def n_intervals(self) -> int:
        return len(self.times) - 1

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    def interval(self, c: int) -> tuple[float, float]:
        """
        Bracketing observation times of interval ``c``.
        """
        return float(self.times[c]), float(self.times[c + 1])


def coordinate_columns(dim: int) -> list[str]:
    if dim == 2:
        return ["x", "y"]
    return ["x{0}".format(k + 1) for k in range(dim)]


def _read_preamble(path: str | os.PathLike) -> tuple[int, str]:
    count = 0
    time_unit = DEFAULT_TIME_UNIT
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            count += 1
            match = _TIME_UNIT_RE.match(line.strip())
            if match:
                time_unit = match.group(1)
    return count, time_unit


def _select_coordinates(columns: list[str], header_line: int) -> list[str]:
    if "x" in columns and "y" in columns:
        return ["x", "y"]
    numbered = sorted(
        (int(match.group(1)), name)
        for name in columns
        if (match := _COORD_RE.match(name))
    )
    if not numbered or [k for k, _ in numbered] != list(range(1, len(numbered) + 1)):
        raise ParseError(
            "header must contain time,x,y or time,x1..xd", line=header_line
        )
    return [name for _, name in numbered]


def ingest_csv(path: str | os.PathLike) -> ObservationTrack:
    """
    Read and validate an observation track.

    Rows with a missing coordinate are dropped with a warning, which widens
    the surrounding interval.

    :raises ParseError: malformed header or non-numeric value (with file line)
    :raises NonMonotoneTime: duplicate or decreasing timestamps
    """
    preamble, time_unit = _read_preamble(path)
    header_line = preamble + 1
    try:
        frame = pd.read_csv(
            path, dtype=str, skiprows=preamble, keep_default_na=False
        )
    except pd.errors.EmptyDataError as exc:
        raise ParseError("file is empty", line=header_line) from exc
    except pd.errors.ParserError as exc:
        raise ParseError("malformed CSV: {0}".format(exc)) from exc
    frame.columns = [str(column).strip() for column in frame.columns]
    if "time" not in frame.columns:
        raise ParseError("header has no time column", line=header_line)
    coords = _select_coordinates(list(frame.columns), header_line)

    text = (
        frame[["time"] + coords]
        .fillna("")
        .apply(lambda column: column.str.strip())
    )
    times = pd.to_numeric(text["time"], errors="coerce")
    values = text[coords].apply(pd.to_numeric, errors="coerce")
    missing = (text[coords] == "").any(axis=1)

    keep: list[int] = []
    for row in range(len(text)):
        line = header_line + 1 + row
        if text["time"].iloc[row] == "":
            raise ParseError("blank time", line=line)
        if not np.isfinite(times.iloc[row]):
            raise ParseError(
                "non-numeric time {0!r}".format(text["time"].iloc[row]), line=line
            )
        if missing.iloc[row]:
            LOGGER.warning("line {}: dropped row with missing coordinates", line)
            continue
        if not np.all(np.isfinite(values.iloc[row].to_numpy(dtype=float))):
            raise ParseError("non-numeric coordinate", line=line)
        if keep and times.iloc[row] <= times.iloc[keep[-1]]:
            raise NonMonotoneTime(
                "line {0}: time {1!r} does not follow {2!r}".format(
                    line, float(times.iloc[row]), float(times.iloc[keep[-1]])
                )
            )
        keep.append(row)

    return ObservationTrack(
        times.iloc[keep].to_numpy(dtype=float),
        values.iloc[keep].to_numpy(dtype=float),
        time_unit,
    )


def write_track_csv(path: str | os.PathLike, track: ObservationTrack) -> None:
    """
    Write a track in the format read by :func:`ingest_csv`.
    """
    frame = pd.DataFrame(track.locations, columns=coordinate_columns(track.dim))
    frame.insert(0, "time", track.times)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("# time_unit: {0}\n".format(track.time_unit))
        frame.to_csv(handle, index=False, float_format="%.17g", lineterminator="\n")
