"""Hot numerical kernels with a compiled core and a pure-numpy fallback.

The compiled Cython extension is preferred; the numpy implementation is
selected when the extension is unavailable or when the environment variable
``DRIFTFIELD_PURE_PYTHON`` is set to a non-empty value. Both backends expose
the same functions and agree to floating-point noise (summation order may
differ, so results are not guaranteed bitwise-equal across backends).
"""

import os

if os.environ.get("DRIFTFIELD_PURE_PYTHON"):
    from . import _numpy as _impl

    HAVE_COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        from . import _numpy as _impl

        HAVE_COMPILED = False

BACKEND = "compiled" if HAVE_COMPILED else "numpy"

nn_query = _impl.nn_query
knn_query = _impl.knn_query
fps = _impl.fps
kde_gradient = _impl.kde_gradient

__all__ = [
    "BACKEND",
    "HAVE_COMPILED",
    "nn_query",
    "knn_query",
    "fps",
    "kde_gradient",
]
