"""Iteration-kernel selection: compiled extension with NumPy fallback.

The compiled kernel is optional; when the extension failed to build (or was
never built) the NumPy implementation is used transparently. Both expose
``run_trajectory`` with identical semantics.
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels_cy
except ImportError:  # extension not built
    _kernels_cy = None


def compiled_available() -> bool:
    return _kernels_cy is not None


def select(name: str = "auto"):
    """Return the kernel module for ``name``: 'auto', 'compiled' or 'python'."""
    if name == "auto":
        return _kernels_cy if _kernels_cy is not None else _kernels_py
    if name == "compiled":
        if _kernels_cy is None:
            raise RuntimeError("compiled kernel requested but the extension is not built")
        return _kernels_cy
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown kernel {name!r}; expected 'auto', 'compiled' or 'python'")
