"""Floating-point odd-power kernel polynomials on [0, 1].

An :class:`OddPolynomial` represents ``sum_j c_j t^(2j-1)``. When it carries
an exact rational twin, evaluation uses Clenshaw's recurrence in the
shifted-Chebyshev basis of ``x = t^2`` (coefficients converted exactly, then
rounded once). High-order kernels have monomial coefficients in the 1e9
range that cancel to values of order one, which monomial Horner cannot
resolve to the accuracy the reconstruction needs. Horner remains available.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import Sequence

import numpy as np

from cmrt import _accel
from cmrt.exactcoeff import CoeffTables, MissingEntryError, z_coefficients

DOMAIN_TOL = 1e-12


class DomainError(ValueError):
    """Evaluation point outside [0, 1]."""


def shifted_chebyshev(coeffs: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """Exact coefficients ``d_m`` with ``sum_j c_j x^(j-1) = sum_m d_m T_m(2x - 1)``.

    Uses ``x^n = 4^-n [C(2n, n) T*_0 + 2 sum_{m=1}^n C(2n, n-m) T*_m]``.
    """
    n = len(coeffs)
    out = [Fraction(0)] * n
    for j, c in enumerate(coeffs):
        if not c:
            continue
        scale = Fraction(c, 4**j)
        out[0] += scale * comb(2 * j, j)
        for m in range(1, j + 1):
            out[m] += 2 * scale * comb(2 * j, j - m)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class OddPolynomial:
    coeffs: tuple[float, ...]
    exact: tuple[Fraction, ...] | None = None
    label: str = ""

    @classmethod
    def from_exact(cls, coeffs: Sequence[Fraction], label: str = "") -> "OddPolynomial":
        exact = tuple(Fraction(c) for c in coeffs)
        return cls(tuple(float(c) for c in exact), exact, label)

    @property
    def degree(self) -> int:
        """``2 * len - 1`` after dropping trailing zeros; -1 for the zero polynomial."""
        n = len(self.coeffs)
        while n and self.coeffs[n - 1] == 0:
            n -= 1
        return 2 * n - 1 if n else -1

    @cached_property
    def cheb(self) -> np.ndarray | None:
        if self.exact is None:
            return None
        return np.array([float(d) for d in shifted_chebyshev(self.exact)])

    @cached_property
    def _monomial(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)

    def exact_value(self, t: Fraction) -> Fraction:
        if self.exact is None:
            raise ValueError("no exact twin attached")
        t = Fraction(t)
        x = t * t
        acc = Fraction(0)
        for c in reversed(self.exact):
            acc = acc * x + c
        return t * acc

    def __call__(self, t, method: str | None = None):
        return eval_odd_poly(self, t, method)


def eval_odd_poly(poly: OddPolynomial, t, method: str | None = None):
    """Evaluate ``sum_j c_j t^(2j-1)`` for ``t`` in [0, 1] (scalar or array).

    ``method`` is ``"clenshaw"`` (default when an exact twin exists) or
    ``"horner"`` (``t * Horner(c, t^2)``). The result at ``t = 0`` is exactly
    zero either way.
    """
    arr = np.asarray(t, dtype=float)
    if arr.size and (np.min(arr) < -DOMAIN_TOL or np.max(arr) > 1.0 + DOMAIN_TOL):
        raise DomainError(f"t must lie in [0, 1], got range [{np.min(arr)}, {np.max(arr)}]")
    flat = np.clip(arr, 0.0, 1.0).ravel()
    if method is None:
        method = "clenshaw" if poly.exact is not None else "horner"
    if method == "clenshaw":
        if poly.cheb is None:
            raise ValueError("clenshaw evaluation needs the exact twin")
        out = _accel.clenshaw_odd(poly.cheb, flat)
    elif method == "horner":
        out = _accel.horner_odd(poly._monomial, flat)
    else:
        raise ValueError(f"unknown method {method!r}")
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def kernel_for(tables: CoeffTables, family: str, k_or_n: int, i: int) -> OddPolynomial:
    """Kernel ``A_{2k,2i}``, ``B_{2k-1,2i-1}`` or ``Z_{n,i}`` as an :class:`OddPolynomial`."""
    family = family.upper()
    if family == "A":
        exact, label = tables.A(k_or_n, i), f"A_{{{2 * k_or_n},{2 * i}}}"
    elif family == "B":
        exact, label = tables.B(k_or_n, i), f"B_{{{2 * k_or_n - 1},{2 * i - 1}}}"
    elif family == "Z":
        exact, label = z_coefficients(tables, k_or_n, i), f"Z_{{{k_or_n},{i}}}"
    else:
        raise MissingEntryError(f"unknown kernel family {family!r}")
    return OddPolynomial.from_exact(exact, label)


def write_kernel_csv(poly: OddPolynomial, path, n_samples: int = 256) -> None:
    """Sample ``poly`` on a uniform grid of [0, 1]; columns ``t,value``."""
    t = np.linspace(0.0, 1.0, n_samples)
    v = eval_odd_poly(poly, t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for ti, vi in zip(t, v):
            w.writerow([f"{ti:.17g}", f"{vi:.17g}"])
