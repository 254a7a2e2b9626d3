"""Backend selection for the stencil kernels.

Prefers the compiled extension (brinkhom._kernels); falls back to the
numpy implementations. Set BRINKHOM_PURE_PYTHON=1 to force the fallback,
e.g. for the backend benchmark.
"""

import os

from . import _kernels_py

if os.environ.get("BRINKHOM_PURE_PYTHON", "0") == "1":
    _impl = _kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        COMPILED = True
    except ImportError:
        _impl = _kernels_py
        COMPILED = False

BACKEND = "compiled" if COMPILED else "numpy"

apply_poisson7 = _impl.apply_poisson7
upwind_update = _impl.upwind_update
apply_viscous_strain = _impl.apply_viscous_strain


def get_backends():
    """(name, module) pairs of every available backend, for benchmarks/tests."""
    out = [("numpy", _kernels_py)]
    try:
        from . import _kernels
        out.append(("compiled", _kernels))
    except ImportError:
        pass
    return out
