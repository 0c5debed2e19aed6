"""Python bindings for the qsed C++ library."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

QM = Theory.QM  # noqa: F405
SED = Theory.SED  # noqa: F405
