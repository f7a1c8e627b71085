# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later
"""
Constants used by inch-movement.
"""


# Return codes used in cli.py and test files.
RC_SUCCESS = 0  # Success
RC_UNHANDLED_ERROR = 1  # Unhandled error.  See the Traceback for more information.
RC_VALIDATION_ERROR = 2  # Bad command line arguments, config, or input data.
RC_GUARD_BREACH = 3  # A computational guard (sequence enumeration size) was exceeded.
RC_COMMAND_FAILED = 5  # Problem occurred which prevented the execution of the command.

# Upper bound on the number of interior state sequences enumerated per interval.
DEFAULT_SEQUENCE_GUARD = 10**6

# Upper bound on the number of state sequences in brute-force enumeration.
BRUTE_FORCE_GUARD = 10**7

# Tolerance used when checking probability vectors and row sums.
PROBABILITY_TOLERANCE = 1e-12
