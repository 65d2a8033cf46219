"""Selects the compiled superpixel kernel when present, numpy otherwise.

Set ``SEGBOOST_BACKEND=python`` to force the fallback (used by the kernel
benchmark and the backend-parity tests).
"""
from __future__ import annotations

import os

from . import _kernels_np

if os.environ.get("SEGBOOST_BACKEND", "").lower() == "python":
    _impl = _kernels_np
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_np

slic_iterate = _impl.slic_iterate


def active_backend() -> str:
    """Name of the kernel backend in use: 'compiled' or 'python'."""
    return _impl.BACKEND
