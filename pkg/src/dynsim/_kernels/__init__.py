"""Alignment loop kernels: compiled extension with a pure-numpy fallback.

The backend is chosen once at import.  ``DYNSIM_BACKEND`` overrides the
default: ``auto`` (compiled when available), ``compiled``, or ``python``.
"""

import os

from ._params import (  # noqa: F401
    RETRACT_CAYLEY,
    RETRACT_POLAR,
    RETRACT_QR,
    STOP_GRAD,
    STOP_MAX_ITERS,
    STOP_STEP_UNDERFLOW,
    STOP_TIME,
)
from . import _pyloops

_choice = os.environ.get("DYNSIM_BACKEND", "auto").lower()
if _choice in ("auto", "compiled", "cython"):
    try:
        from . import _cyloops as _impl

        BACKEND = "compiled"
    except ImportError:
        if _choice != "auto":
            raise
        _impl = _pyloops
        BACKEND = "python"
elif _choice in ("python", "numpy"):
    _impl = _pyloops
    BACKEND = "python"
else:
    raise ValueError(f"unknown DYNSIM_BACKEND {_choice!r}")

baseline_loop = _impl.baseline_loop
ro_loop = _impl.ro_loop
rim_loop = _impl.rim_loop
landing_loop = _impl.landing_loop


def get_backend(name: str = "active"):
    """Return a kernel module by name ('active', 'python', or 'compiled')."""
    if name == "active":
        return _impl
    if name in ("python", "numpy"):
        return _pyloops
    if name in ("compiled", "cython"):
        from . import _cyloops

        return _cyloops
    raise ValueError(f"unknown backend {name!r}")
