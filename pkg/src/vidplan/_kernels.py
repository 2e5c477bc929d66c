"""Kernel dispatch: the compiled extension when it imports, numpy otherwise.

Set ``VIDPLAN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if not os.environ.get("VIDPLAN_PURE_PYTHON"):
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

causal_fir = _impl.causal_fir
block_match = _impl.block_match
