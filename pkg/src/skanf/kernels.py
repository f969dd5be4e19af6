"""Kernel backend selection.

The compiled extension is preferred; set ``SKANF_PURE_PYTHON=1`` to force the
pure-Python fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("SKANF_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

keccak256 = _impl.keccak256
scan_code = _impl.scan_code

__all__ = ["BACKEND", "keccak256", "scan_code"]
