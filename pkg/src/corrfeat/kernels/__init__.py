"""Hot inner loops, compiled with numba when available.

Set ``CORRFEAT_DISABLE_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``)
to run the pure-numpy implementations instead. The choice is made once at
import time; both backends stay importable as ``kernels.numpy_backend``
and ``kernels.numba_backend`` for comparison.
"""

import os

from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None


def _numba_requested():
    flag = os.environ.get("CORRFEAT_DISABLE_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on"):
        return False
    return numba_backend is not None


USE_NUMBA = _numba_requested()
backend = numba_backend if USE_NUMBA else numpy_backend
BACKEND_NAME = "numba" if USE_NUMBA else "numpy"

stump_scan = backend.stump_scan
route = backend.route
haar_eval = backend.haar_eval
midpoint = numpy_backend.midpoint

__all__ = ["BACKEND_NAME", "USE_NUMBA", "haar_eval", "midpoint", "route",
           "stump_scan", "numpy_backend", "numba_backend"]
