"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy fallback
is loaded. Setting ``SUBSIDYLAB_PURE=1`` forces the fallback.
"""
import os

from . import _fallback

if os.environ.get("SUBSIDYLAB_PURE") == "1":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

forcing_transform = _impl.forcing_transform
nash_mask = _impl.nash_mask
nash_mask_batch = _impl.nash_mask_batch
csg_nash_mask = _impl.csg_nash_mask
