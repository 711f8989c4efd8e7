"""Four-party quantum secret sharing simulator."""

from ._qss import *  # noqa: F401,F403
from ._qss import __doc__  # noqa: F401
