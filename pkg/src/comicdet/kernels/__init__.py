"""Box kernels with a compiled fast path and a NumPy fallback.

The Cython extension is selected at import time when available; set the
environment variable ``COMICDET_PURE_PYTHON=1`` to force the NumPy
reference implementation.  ``benchmarks/bench_kernels.py`` compares the
two backends.
"""

import os

from . import _reference

if os.environ.get("COMICDET_PURE_PYTHON"):
    _impl = _reference
    BACKEND = "numpy"
else:
    try:
        from . import _box_kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _reference
        BACKEND = "numpy"

iou_matrix = _impl.iou_matrix
cocentered_iou = _impl.cocentered_iou
nms_keep = _impl.nms_keep

__all__ = ["BACKEND", "iou_matrix", "cocentered_iou", "nms_keep"]
