"""Inversion of the circular-mean Radon transform with centers on a line."""
from cmrt.exactcoeff import CoeffTables, build_tables, z_coefficients
from cmrt.kernels import OddPolynomial, eval_odd_poly, kernel_for

__all__ = [
    "CoeffTables",
    "OddPolynomial",
    "build_tables",
    "eval_odd_poly",
    "kernel_for",
    "z_coefficients",
]
__version__ = "0.1.0"
