# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Exact Bayesian inference for integrated continuous-time hidden Markov models.
"""

__version__ = "0.1.0.post0"

__all__ = ("__version__",)
