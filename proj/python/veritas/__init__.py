"""Link-level 5G simulator with a verified neural receiver loop.

The compiled extension carries all functionality; this package re-exports it.
"""

try:
    from ._veritas import *  # noqa: F401,F403
except ImportError:  # extension on the path but outside the package (dev builds)
    from _veritas import *  # noqa: F401,F403
