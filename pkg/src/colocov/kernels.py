"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``COLOCOV_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from colocov import _kernels_py

compiled = None
if os.environ.get("COLOCOV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from colocov import _kernels as compiled  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        compiled = None

BACKEND = "cython" if compiled is not None else "python"
_impl = compiled if compiled is not None else _kernels_py

raycast_bvh = _impl.raycast_bvh
fnv1a64 = _impl.fnv1a64
intersect_many = _kernels_py.intersect_many


def get_backend(name: str | None = None):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        if compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
