"""Kernel backend selection.

The hot numerical kernels (fused forward/backward pass, aggregation
primitives) exist twice: a compiled Cython extension (``_core``) and a pure
NumPy fallback (``_numpy``). The compiled module is preferred when it
imported successfully; ``FEDFLIP_BACKEND=numpy|cython`` forces a choice.
Selection happens once at import so a whole process run uses one backend.
"""

from __future__ import annotations

import os

from . import _numpy

_requested = os.environ.get("FEDFLIP_BACKEND")

if _requested == "numpy":
    _impl = _numpy
elif _requested == "cython":
    from . import _core as _impl  # ImportError is the right failure here
elif _requested is None:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _numpy
else:
    raise ImportError(
        f"FEDFLIP_BACKEND={_requested!r} is not a backend; use 'numpy' or 'cython'"
    )

BACKEND = _impl.NAME

logits = _impl.logits
loss_and_grad = _impl.loss_and_grad
weighted_average = _impl.weighted_average
coordinate_median = _impl.coordinate_median
trimmed_mean = _impl.trimmed_mean
krum_scores = _impl.krum_scores
softmax_xent = _numpy.softmax_xent


def available_backends() -> list[str]:
    """Names of importable backends (used by tests and the benchmark)."""
    names = ["numpy"]
    try:
        from . import _core  # noqa: F401
    except ImportError:
        pass
    else:
        names.append("cython")
    return names


def get_backend(name: str):
    """Return a specific backend module regardless of the active selection."""
    if name == "numpy":
        return _numpy
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
