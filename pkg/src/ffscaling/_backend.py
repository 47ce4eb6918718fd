"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``FFSCALING_PURE=1`` to force the numpy kernels.
"""

import os

from . import _pure

STATUS_OK = _pure.STATUS_OK
STATUS_FAILED = _pure.STATUS_FAILED
STATUS_NODE = _pure.STATUS_NODE
STATUS_JUMP = _pure.STATUS_JUMP

_ext = None
if not os.environ.get("FFSCALING_PURE"):
    try:
        from . import _ext  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        _ext = None

KERNELS = {"pure": _pure}
if _ext is not None:
    KERNELS["compiled"] = _ext

BACKEND = "compiled" if _ext is not None else "pure"


def get(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    name = name or BACKEND
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(KERNELS)}") from None
