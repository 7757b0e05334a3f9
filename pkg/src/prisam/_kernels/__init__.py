"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise the
pure-Python module takes over with identical semantics. Set PRISAM_PURE=1
to force the fallback (useful for timing comparisons and parity checks).
"""

import os

from . import pure

if os.environ.get("PRISAM_PURE"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

topk_all = _impl.topk_all
topk_masked = _impl.topk_masked
nucleus_pick = _impl.nucleus_pick
topk_pick = _impl.topk_pick

__all__ = [
    "BACKEND",
    "pure",
    "topk_all",
    "topk_masked",
    "nucleus_pick",
    "topk_pick",
]
