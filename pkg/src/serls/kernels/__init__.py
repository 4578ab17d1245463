"""Hot numerical kernels with a compiled core and a NumPy fallback.

The compiled extension (``serls.kernels._native``, built from Cython) is
preferred when importable; otherwise the pure NumPy implementation in
``serls.kernels._numpy`` is used.  Set ``SERLS_PURE_PYTHON=1`` to force
the fallback, e.g. for benchmarking one against the other.

All kernels take float64 arrays and perform no validation; the public
modules wrapping them do.
"""

import os

from serls.kernels import _numpy

if os.environ.get("SERLS_PURE_PYTHON"):
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from serls.kernels import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = _numpy
        BACKEND = "numpy"

weighted_median = _impl.weighted_median
# np.clip is already a single fused C kernel and benchmarks faster than the
# compiled loop at every size, so winsorize is never dispatched natively.
winsorize = _numpy.winsorize
huber_sum = _impl.huber_sum
bspline_design = _impl.bspline_design

__all__ = ["BACKEND", "weighted_median", "winsorize", "huber_sum", "bspline_design"]
