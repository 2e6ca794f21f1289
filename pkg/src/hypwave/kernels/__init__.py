"""Hot-loop RHS kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imported successfully and the
environment variable ``HYPWAVE_PURE_PYTHON`` is unset/falsy; otherwise the
numpy reference implementation is used.  Both expose the same functions:

    rhs_linear(phi, pi, h, out)   -> out = lap(phi)
    rhs_wavemap(phi, pi, h, out)  -> out = lap(phi) + phi*(-pi^2 + |grad phi|^2)

``IMPL`` names the active backend ("cython" or "numpy").
"""

import os

from . import _ref

if os.environ.get("HYPWAVE_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _backend = _ref
else:
    try:
        from . import _core as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _ref

IMPL = _backend.IMPL
rhs_linear = _backend.rhs_linear
rhs_wavemap = _backend.rhs_wavemap

__all__ = ["IMPL", "rhs_linear", "rhs_wavemap"]
