"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when it was built; otherwise the
numpy implementations in ``_kernels_py`` are used. Setting
``LPSTAB_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

_compiled = None
if os.environ.get("LPSTAB_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py
BACKEND = "cython" if _compiled is not None else "python"

_NAMES = (
    "sign_pattern_max",
    "greedy_net_lattice",
    "greedy_net_dense",
    "dist_to_set_lattice",
    "row_thickness_dense",
)


def backends():
    """Available implementations keyed by name (for tests and benchmarks)."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


sign_pattern_max = _impl.sign_pattern_max
greedy_net_lattice = _impl.greedy_net_lattice
greedy_net_dense = _impl.greedy_net_dense
dist_to_set_lattice = _impl.dist_to_set_lattice
row_thickness_dense = _impl.row_thickness_dense
