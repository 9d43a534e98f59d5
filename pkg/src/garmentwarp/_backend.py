"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise the numpy
fallback. :func:`use` switches explicitly (tests and the benchmark do).
"""

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["native"] = _ckernels

_active = _BACKENDS.get("native", _pykernels)


def available():
    return sorted(_BACKENDS)


def active():
    return _active


def name():
    return _active.NAME


def use(backend):
    """Select ``"native"`` or ``"python"``; returns the previous name."""
    global _active
    if backend not in _BACKENDS:
        raise ValueError(f"backend {backend!r} not available (have {available()})")
    prev = _active.NAME
    _active = _BACKENDS[backend]
    return prev
