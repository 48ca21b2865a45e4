"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``CYCLICAVAIL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

IMPLEMENTATION = "python"
_impl = _kernels_py

if os.environ.get("CYCLICAVAIL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        IMPLEMENTATION = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

forward = _impl.forward
backward = _impl.backward
accumulate_transitions = _impl.accumulate_transitions
gap_edge_fractions = _impl.gap_edge_fractions
heuristic_accumulate = _impl.heuristic_accumulate


def implementations():
    """Both kernel modules keyed by name; the compiled one only when built."""
    impls = {"python": _kernels_py}
    try:
        from . import _kernels

        impls["cython"] = _kernels
    except ImportError:
        pass
    return impls
