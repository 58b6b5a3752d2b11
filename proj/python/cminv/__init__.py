# Copyright (C) 2026 The cminv Authors
# SPDX-License-Identifier: Apache-2.0
"""Consistency-model samplers for inverse problems.

Images are float64 numpy arrays of shape (channels, height, width).
"""

from ._cminv import *  # noqa: F401,F403
from ._cminv import __doc__  # noqa: F401

__version__ = "0.1.0"
