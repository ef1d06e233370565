"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise (or when
``USTAT_BOUNDS_PURE=1`` is set) the numpy fallback is used. Both produce
identical numbers.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
HAVE_EXTENSION = _ckernels is not None

if HAVE_EXTENSION and not os.environ.get("USTAT_BOUNDS_PURE"):
    BACKEND = "cython"
    enumerate_chunk = _ckernels.enumerate_chunk
    eval_sampled = _ckernels.eval_sampled
else:
    BACKEND = "python"
    enumerate_chunk = _pykernels.enumerate_chunk
    eval_sampled = _pykernels.eval_sampled


def get_backend(name=None):
    """Return ``(enumerate_chunk, eval_sampled)`` for ``name`` or the default."""
    if name is None:
        return enumerate_chunk, eval_sampled
    if name == "python":
        return _pykernels.enumerate_chunk, _pykernels.eval_sampled
    if name == "cython":
        if not HAVE_EXTENSION:
            raise ValueError("compiled backend is not built")
        return _ckernels.enumerate_chunk, _ckernels.eval_sampled
    raise ValueError(f"unknown backend {name!r}")
