"""rho-Bayes posteriors over finite nets of densities."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
