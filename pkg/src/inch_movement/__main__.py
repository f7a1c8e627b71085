# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Executable entrypoint to the inch_movement module.

Called by "python -m inch_movement".
"""

from __future__ import annotations

import sys

from .cli import run

args = ["{0} -m inch_movement".format(sys.executable)] + sys.argv[1:]

sys.exit(run(args))
