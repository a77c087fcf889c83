"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting the environment
variable ``RANDZS_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("RANDZS_PURE_PYTHON", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

lyap_advance = _impl.lyap_advance
phase_winding = _impl.phase_winding
lnb_ensemble = _impl.lnb_ensemble


def backends():
    """Mapping of available backend names to kernel modules."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
