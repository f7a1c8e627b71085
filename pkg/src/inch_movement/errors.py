# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Error classes.
"""

from __future__ import annotations


class InchError(Exception):
    """
    Generic error class.
    """


class ValidationError(InchError):
    """
    Invalid user input: configuration, command line, or data files.
    """


class ConfigError(ValidationError):
    """
    Invalid configuration value.
    """

    field: str | None

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field:
            message = "{0}: {1}".format(field, message)
        super().__init__(message)


class ParseError(ValidationError):
    """
    Malformed data file.
    """

    line: int | None

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = "line {0}: {1}".format(line, message)
        super().__init__(message)


class NonMonotoneTime(ValidationError):
    """
    Observation times are not strictly increasing.
    """


class PreconditionViolation(InchError):
    """
    An operation was called with arguments violating its precondition.
    """


class DegenerateCovariance(InchError):
    """
    A movement covariance is not positive definite.
    """


class UnboundedPrior(InchError):
    """
    A switching-rate prior bound is infinite, so no uniformization rate exists.
    """


class NumericalUnderflow(InchError):
    """
    Every state sequence has zero density.
    """


class TooLarge(InchError):
    """
    A brute-force enumeration would exceed its size guard.
    """


class SequenceLengthMismatch(InchError):
    """
    A state sequence does not match the number of potential switches.
    """


class GuardBreach(InchError):
    """
    A computational guard was exceeded.
    """


class TooManySwitches(GuardBreach):
    """
    An interval has too many potential switches to enumerate its state sequences.
    """

    interval: int | None
    count: int

    def __init__(self, count: int, limit: int, interval: int | None = None):
        self.interval = interval
        self.count = count
        where = "" if interval is None else " in interval {0}".format(interval)
        super().__init__(
            "{0} potential switches{1} need more than {2} state sequences;"
            " kappa is too large for this method".format(count, where, limit)
        )


class CacheIncoherent(InchError):
    """
    Cached chain quantities disagree with a fresh recomputation.
    """
