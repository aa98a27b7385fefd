"""Independent exact derivation of the A/B kernels by symbolic integration.

This does not use the coefficient recurrences at all. It starts from the
integral solutions of the two radial ODE systems,

    b_1(r)      = r^-1      int_0^r -2u M_p(u) du
    b_{2k-1}(r) = r^-(2k-1) int_0^r u^(2k-2) [-2u M_p - 2 sum_{j<k} (2j-1) b_{2j-1}
                                              - 2u sum_{j<k} d_p a_{2j}] du
    a_{2k}(r)   = r^-2k     int_0^r u^(2k-1) [2u M_u - 4 sum_{j<k} j a_{2j}
                                              + 2u sum_{j<=k} d_p b_{2j-1}] du

and carries every coefficient as a linear functional of the data
``D^d(v) = d_p^d Mf(p, v)``: a *local* part ``sum_d c_d(s) D^d(s)`` plus an
*integral* part ``sum_d int_0^s K_d(s, v) D^d(v) dv``. Nested integrals are
collapsed by swapping the integration order and integrating the monomials
in ``u`` exactly with sympy. The ``M_u`` term is integrated by parts, which
produces the ``2 Mf(p, r)`` boundary term. Finally each kernel is divided by
the expected power of ``r`` and written in ``t = v / r``.
"""
from __future__ import annotations

from fractions import Fraction

import sympy as sp

_u, _v, _s, _t = sp.symbols("u v s t", positive=True)


class _Functional:
    """``sum_d loc[d](s) D^d(s) + sum_d int_0^s ker[d](s, v) D^d(v) dv``."""

    def __init__(self, loc=None, ker=None):
        self.loc = dict(loc or {})
        self.ker = dict(ker or {})

    def dp(self):
        return _Functional({d + 1: e for d, e in self.loc.items()}, {d + 1: e for d, e in self.ker.items()})

    def __mul__(self, c):
        return _Functional({d: c * e for d, e in self.loc.items()}, {d: c * e for d, e in self.ker.items()})

    __rmul__ = __mul__

    def __add__(self, other):
        loc, ker = dict(self.loc), dict(self.ker)
        for d, e in other.loc.items():
            loc[d] = loc.get(d, 0) + e
        for d, e in other.ker.items():
            ker[d] = ker.get(d, 0) + e
        return _Functional(loc, ker)


def _sum(items):
    out = _Functional()
    for f in items:
        out = out + f
    return out


def _weighted_average(F: _Functional, power: int, norm: int) -> _Functional:
    """``s^-norm int_0^s u^power F(u) du`` as a functional in ``s``."""
    out = {}
    for d, e in F.loc.items():
        out[d] = out.get(d, 0) + e.subs(_s, _v) * _v**power / _s**norm
    for d, e in F.ker.items():
        # int_0^s u^power int_0^u K(u, v) D(v) dv du = int_0^s D(v) int_v^s u^power K(u, v) du dv
        inner = sp.integrate(sp.expand(e.subs(_s, _u) * _u**power), (_u, _v, _s))
        out[d] = out.get(d, 0) + inner / _s**norm
    return _Functional({}, {d: sp.expand(e) for d, e in out.items()})


def _radial_term(order: int) -> _Functional:
    """``s^-order int_0^s u^(order-1) 2u M_u(u) du`` after integration by parts."""
    return _Functional({0: sp.Integer(2)}, {0: -2 * order * _v ** (order - 1) / _s**order})


def derive(k_max: int) -> tuple[dict, dict]:
    """Functionals for ``a_{2k}`` and ``b_{2k-1}``, ``k = 1..k_max``."""
    a, b = {}, {}
    for k in range(1, k_max + 1):
        G = _Functional({1: sp.Integer(-2) * _s})
        G = G + _sum((-2 * (2 * j - 1)) * b[j] for j in range(1, k))
        G = G + _sum((-2 * _s) * a[j].dp() for j in range(1, k))
        b[k] = _weighted_average(G, 2 * k - 2, 2 * k - 1)

        H = _sum((-4 * j) * a[j] for j in range(1, k))
        H = H + _sum((2 * _s) * b[j].dp() for j in range(1, k + 1))
        a[k] = _radial_term(2 * k) + _weighted_average(H, 2 * k - 1, 2 * k)
    return a, b


def _odd_coeffs(expr) -> tuple[Fraction, ...]:
    poly = sp.Poly(sp.expand(expr), _t)
    coeffs = poly.all_coeffs()[::-1]
    if any(c != 0 for c in coeffs[0::2]):
        raise ArithmeticError(f"kernel is not odd in t: {expr}")
    return tuple(Fraction(int(c.p), int(c.q)) for c in coeffs[1::2])


def symbolic_tables(k_max: int = 3) -> tuple[dict, dict]:
    """Exact kernel coefficients keyed ``(k, i)`` like :class:`~cmrt.exactcoeff.CoeffTables`.

    Raises ``ArithmeticError`` if a derived functional is not of the
    expected polynomial form (which would contradict the kernel structure).
    """
    a, b = derive(k_max)
    A, B = {}, {}
    for k, F in a.items():
        if set(F.loc) != {0} or sp.simplify(F.loc[0] - 2) != 0:
            raise ArithmeticError(f"a_{2 * k}: unexpected local part {F.loc}")
        for d, e in F.ker.items():
            if d % 2:
                raise ArithmeticError(f"a_{2 * k}: odd derivative order {d}")
            i = d // 2
            A[k, i] = _odd_coeffs(sp.simplify(e.subs(_v, _t * _s) / _s ** (2 * i - 1)))
    for k, F in b.items():
        if F.loc:
            raise ArithmeticError(f"b_{2 * k - 1}: unexpected local part")
        for d, e in F.ker.items():
            if d % 2 == 0:
                raise ArithmeticError(f"b_{2 * k - 1}: even derivative order {d}")
            i = (d + 1) // 2
            B[k, i] = _odd_coeffs(sp.simplify(e.subs(_v, _t * _s) / _s ** (2 * i - 2)))
    return A, B
