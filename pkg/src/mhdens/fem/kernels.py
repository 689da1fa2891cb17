"""Select the element-kernel implementation at import time.

The compiled extension is preferred; the numpy fallback gives identical
results and is used when the extension is unavailable or when the
``MHDENS_PURE_PYTHON`` environment variable is set to a nonempty value.
``benchmarks/kernel_bench.py`` compares the two.
"""

import os

from . import _pykernels

if os.environ.get("MHDENS_PURE_PYTHON"):
    _impl = _pykernels
    HAVE_COMPILED = False
else:
    try:
        from . import _corekernels as _impl  # type: ignore[attr-defined]
        HAVE_COMPILED = True
    except ImportError:
        _impl = _pykernels
        HAVE_COMPILED = False

convection_vectors = _impl.convection_vectors
trilinear_sum = _impl.trilinear_sum
convection_matrices = _impl.convection_matrices

IMPLEMENTATION = "compiled" if HAVE_COMPILED else "python"
