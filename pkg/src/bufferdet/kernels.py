"""Kernel backend selection.

The compiled extension is used when it was built; otherwise, or when
``BUFFERDET_PURE_PYTHON=1`` is set, the pure-Python twin is used.
"""

import os

from . import _kernels_py

if os.environ.get("BUFFERDET_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
wbs_update = _impl.wbs_update
greedy_match = _impl.greedy_match


def available_backends():
    """Map backend name to kernel module for every backend importable here."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
