"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set CCFSIM_PURE_PYTHON=1 to force the fallback. Both backends produce
bit-identical results (enforced by the parity tests).
"""

import os

from . import py_impl

GAMMA = py_impl.GAMMA

if os.environ.get("CCFSIM_PURE_PYTHON", "") not in ("", "0"):
    _impl = py_impl
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = py_impl
        BACKEND = "python"

prg_values = _impl.prg_values
pair_masks = _impl.pair_masks
pairwise_sq_sum = _impl.pairwise_sq_sum
