"""Stepper selection: compiled kernel when importable, numpy otherwise.

``SHE_MOMENTS_PURE=1`` forces the numpy path.
"""
from __future__ import annotations

import os

from . import _fallback

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

__all__ = ["DEFAULT_BACKEND", "available_backends", "get_runner"]


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


DEFAULT_BACKEND = "compiled" if _compiled is not None and not os.environ.get("SHE_MOMENTS_PURE") else "python"


def get_runner(backend: str | None = None):
    name = backend or DEFAULT_BACKEND
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled Monte Carlo kernel is not available; rebuild or use backend='python'")
        return _compiled.run_path
    if name == "python":
        return _fallback.run_path
    raise ValueError(f"unknown backend {name!r}")
