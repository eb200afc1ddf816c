"""Kernel selection: compiled extension when built, pure Python otherwise.

The env var EBTREE_KERNEL forces the choice: ``compiled``, ``pure`` or
``auto`` (default). Both kernels implement the same API and produce
byte-identical structures; the compiled one only exists for speed.
"""

from __future__ import annotations

import os

from . import _pykernel
from .errors import ConfigError

try:
    from . import _ckernel
except ImportError:
    _ckernel = None


def available_kernels() -> dict:
    """Name -> kernel module, for everything importable in this install."""
    kernels = {"pure": _pykernel}
    if _ckernel is not None:
        kernels["compiled"] = _ckernel
    return kernels


def get_kernel(name: str | None = None):
    """Resolve a kernel module by name, honouring EBTREE_KERNEL."""
    if name is None:
        name = os.environ.get("EBTREE_KERNEL", "auto")
    if name == "auto":
        return _ckernel if _ckernel is not None else _pykernel
    if name == "pure":
        return _pykernel
    if name == "compiled":
        if _ckernel is None:
            raise ConfigError("compiled kernel requested but not built")
        return _ckernel
    raise ConfigError(f"unknown kernel {name!r} (use auto, compiled or pure)")


DEFAULT = get_kernel()
