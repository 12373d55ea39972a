"""Selects the compiled kernels when built, the pure-Python loops otherwise.

Set ``WINGFUSE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if os.environ.get("WINGFUSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

first_order_sections = _impl.first_order_sections
falling_crossings = _impl.falling_crossings

__all__ = ["BACKEND", "first_order_sections", "falling_crossings"]
