"""Kernel selection: compiled Cython core when built, numpy fallback otherwise.

Set ``MQSPREP_PURE_PYTHON=1`` to force the fallback. ``get_backend`` returns
either implementation explicitly regardless of that switch.
"""
from __future__ import annotations

import importlib.util
import os

from . import _fallback

HAVE_COMPILED = importlib.util.find_spec(f"{__package__}._kernels") is not None

BACKEND = "python"

if os.environ.get("MQSPREP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
else:
    _compiled = None

if _compiled is not None:
    apply_ops = _compiled.apply_ops
    qsp_products = _compiled.qsp_products
    BACKEND = "cython"
else:
    apply_ops = _fallback.apply_ops
    qsp_products = _fallback.qsp_products


def get_backend(name: str):
    """Return ``(apply_ops, qsp_products)`` for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _fallback.apply_ops, _fallback.qsp_products
    if name == "cython":
        if _compiled is None:
            from . import _kernels as mod  # raises ImportError if not built
            return mod.apply_ops, mod.qsp_products
        return _compiled.apply_ops, _compiled.qsp_products
    raise ValueError(f"unknown backend {name!r}")
