"""Python bindings for the ccdf core library."""

from ._core import *  # noqa: F401,F403
from ._core import ValidationError, NumericError  # noqa: F401
