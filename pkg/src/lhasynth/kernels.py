"""Kernel dispatch.

The compiled extension is used when it imports; set ``LHASYNTH_PURE_PYTHON=1``
to force the pure-Python implementations.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("LHASYNTH_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build environment
        _impl = _pykernels
else:
    _impl = _pykernels

rdp_mask = _impl.rdp_mask
nearest_centers = _impl.nearest_centers
cumulative_durations = _impl.cumulative_durations

__all__ = ["BACKEND", "rdp_mask", "nearest_centers", "cumulative_durations"]
