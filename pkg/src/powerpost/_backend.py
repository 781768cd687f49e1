"""Selects the compiled kernels when importable, otherwise the numpy fallback.

Set ``POWERPOST_PURE=1`` in the environment to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if os.environ.get("POWERPOST_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "compiled"


def get_kernels(name=None):
    """Return the kernel module called ``name`` ("compiled" or "python").

    ``None`` returns the active one.  Raises ImportError if the compiled
    extension was requested but not built.
    """
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels as compiled
        return compiled
    raise ValueError(f"unknown backend {name!r}")
