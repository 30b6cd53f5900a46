"""Fairness experiments with small-model ensembles on two-group data.

The implementation lives in the native extension; this package re-exports it.
"""

from flab._core import *  # noqa: F401,F403
from flab._core import __version__  # noqa: F401
