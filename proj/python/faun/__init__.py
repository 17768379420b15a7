"""Alternating-updating NMF with an in-process distributed engine."""

from ._core import (
    InvalidArgument,
    IoError,
    NoConvergence,
    ParseError,
    bandwidth_lower_bound,
    cost,
    gen_dense_lowrank,
    gen_sparse_uniform,
    make_grid,
    nmf,
    read_matrix,
    relative_error,
)

__all__ = [
    "InvalidArgument",
    "IoError",
    "NoConvergence",
    "ParseError",
    "bandwidth_lower_bound",
    "cost",
    "gen_dense_lowrank",
    "gen_sparse_uniform",
    "make_grid",
    "nmf",
    "read_matrix",
    "relative_error",
]
