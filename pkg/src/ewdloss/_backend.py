"""Select the kernel implementation at import time.

The compiled extension is used when it was built; setting
``EWDLOSS_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import os

from . import _pykernels

if os.environ.get("EWDLOSS_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        kernels = _pykernels
        BACKEND = "python"
    else:
        BACKEND = "cython"

__all__ = ["kernels", "BACKEND"]
