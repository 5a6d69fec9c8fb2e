"""Python bindings for the msfsolve multicomponent diffusion solver."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, Config, ConfigError, Error, simulate

__all__ = ["Config", "ConfigError", "Error", "simulate", "__version__"]
