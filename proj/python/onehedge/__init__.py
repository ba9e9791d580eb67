from ._onehedge import *  # noqa: F401,F403
from ._onehedge import __doc__  # noqa: F401
