"""Hot loops, compiled with numba when available.

Set ``DPFED_DISABLE_NUMBA=1`` to force the pure-numpy implementations; both
expose the same functions and are tested against each other.
"""

import os

from . import _numpy

try:
    if os.environ.get("DPFED_DISABLE_NUMBA", "0") not in ("", "0"):
        raise ImportError("numba disabled by DPFED_DISABLE_NUMBA")
    from . import _numba
except ImportError:
    _numba = None

_impl = _numba if _numba is not None else _numpy
BACKEND = "numba" if _numba is not None else "numpy"

join_pairs = _impl.join_pairs
compositions = _impl.compositions
plan_costs = _impl.plan_costs

__all__ = ["BACKEND", "compositions", "join_pairs", "plan_costs"]
