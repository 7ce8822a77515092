"""lp stability (boundedness below) of matrices indexed by doubling metric spaces."""
from __future__ import annotations

from . import errors, inverse, io, kernels, opmat, space, stability, verify, zoo
from .errors import LpstabError
from .exponents import DEFAULT_GRID, INF, parse_grid, parse_p
from .io import dumps_matrix, loads_matrix, read_matrix, write_matrix
from .opmat import IndexedMatrix, Weight, op_norm, structural_stats
from .space import MetricSpace, covering, cutoff, explicit, make_space, tree, z_interval, zd_box
from .stability import estimate_lambda, localize, stability_report
from .inverse import build_left_inverse, decay_profile, stability_pipeline

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_GRID",
    "INF",
    "IndexedMatrix",
    "LpstabError",
    "MetricSpace",
    "Weight",
    "build_left_inverse",
    "covering",
    "cutoff",
    "decay_profile",
    "dumps_matrix",
    "errors",
    "estimate_lambda",
    "explicit",
    "inverse",
    "io",
    "kernels",
    "loads_matrix",
    "localize",
    "make_space",
    "op_norm",
    "opmat",
    "parse_grid",
    "parse_p",
    "read_matrix",
    "space",
    "stability",
    "stability_pipeline",
    "stability_report",
    "structural_stats",
    "tree",
    "verify",
    "write_matrix",
    "z_interval",
    "zd_box",
    "zoo",
]
