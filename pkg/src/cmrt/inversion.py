"""Series coefficients of circle restrictions and the point reconstruction.

For a circle ``(p, r)`` the restriction of ``f`` expands as

    f(p, r, phi) = Mf + sum_k a_k(p, r) cos(k phi) + b_k(p, r) sin(k phi)

and both families are determined by ``Mf`` alone. Two routes are provided:

* closed forms with the polynomial kernels (:func:`a_even_lemma`,
  :func:`b_odd_lemma`), one radial quadrature each;
* the nested radial integral recursions (:func:`coeffs_recursive`), which
  never touch the kernel tables.

Radial integrals are written in ``t = u / r`` so the ``i = 0`` factor
``r^-1`` disappears analytically: the ``i``-th term of ``a_{2k}`` is
``r^(2i) int_0^1 A_{2k,2i}(t) d_p^(2i) Mf(p, r t) dt``.

The reconstruction sums ``a_{2k}`` through the standard polynomials
``Z_{n,i}``. Evaluating the restriction at ``phi = 0`` and using the
vanishing of ``f`` at ``phi = pi`` gives ``f = 2 Mf + 2 sum_k a_{2k}``,
which is what the default ``formula="corrected"`` computes:

    f_n(x, y) = 2 (2n+1) Mf + 2 sum_{i=0}^n y^(2i) int_0^1 Z_{n,i}(t) d_x^(2i) Mf(x, y t) dt.

``formula="literal"`` keeps the single-weight variant
``2 (n+1) Mf + sum_i ...`` (equal to ``2 Mf + sum_k a_{2k}``), whose limit
is ``Mf + f / 2`` rather than ``f``.
"""
from __future__ import annotations

import time
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from cmrt.exactcoeff import CoeffTables
from cmrt.kernels import kernel_for
from cmrt.phantoms import Phantom, UnsupportedDerivativeError, phantom_deriv

FORMULAS = ("corrected", "literal")
DERIVATIVE_MODES = ("analytic", "finite_difference")
RECURSION_DEPTH = 4


class RecursionDepthError(ValueError):
    """Requested more nested levels than the recursive path allows."""


@dataclass(frozen=True)
class SeriesConfig:
    n_max: int = 10
    quad_nodes_u: int = 128
    derivative_mode: str = "analytic"
    formula: str = "corrected"

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.quad_nodes_u < 32:
            raise ValueError("quad_nodes_u must be >= 32")
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise ValueError(f"derivative_mode must be one of {DERIVATIVE_MODES}")
        if self.formula not in FORMULAS:
            raise ValueError(f"formula must be one of {FORMULAS}")


@dataclass
class ReconstructionReport:
    x: float
    y: float
    values: np.ndarray
    formula: str
    f_true: float | None = None
    on_line: bool = False
    elapsed: float = 0.0

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    @property
    def errors(self) -> np.ndarray | None:
        if self.f_true is None:
            return None
        return np.abs(self.values - self.f_true)

    def __getitem__(self, n: int) -> float:
        return float(self.values[n])


# ---------------------------------------------------------------------------
# quadrature and kernel caches


@lru_cache(maxsize=None)
def gauss_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


_KERNEL_CACHE: "weakref.WeakKeyDictionary[CoeffTables, dict]" = weakref.WeakKeyDictionary()


def weighted_kernel(tables: CoeffTables, family: str, k: int, i: int, n_nodes: int) -> np.ndarray:
    """Quadrature weights times the kernel at the unit Gauss-Legendre nodes."""
    store = _KERNEL_CACHE.setdefault(tables, {})
    key = (family, k, i, n_nodes)
    hit = store.get(key)
    if hit is None:
        t, w = gauss_unit(n_nodes)
        hit = w * kernel_for(tables, family, k, i)(t)
        hit.setflags(write=False)
        store[key] = hit
    return hit


def z_weight_stack(tables: CoeffTables, n_max: int, n_nodes: int) -> np.ndarray:
    """``(n_max+1, n_max+1, Q)`` array; ``[n, i]`` holds ``w * Z_{n,i}(t)`` (zero for ``i > n``)."""
    store = _KERNEL_CACHE.setdefault(tables, {})
    key = ("Zstack", n_max, n_nodes)
    hit = store.get(key)
    if hit is None:
        hit = np.zeros((n_max + 1, n_max + 1, n_nodes))
        for n in range(n_max + 1):
            for i in range(n + 1):
                hit[n, i] = weighted_kernel(tables, "Z", n, i, n_nodes)
        hit.setflags(write=False)
        store[key] = hit
    return hit


def _need(field, order: int) -> None:
    if order > field.max_derivative:
        raise UnsupportedDerivativeError(f"needs p-derivatives of order {order}; the data provides {field.max_derivative}")


# ---------------------------------------------------------------------------
# closed-form coefficients


def lemma_coefficients(tables: CoeffTables, field, p: float, r: float, k_max: int,
                       n_nodes: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """``a_{2k}`` and ``b_{2k-1}`` for ``k = 1..k_max`` from one batch of derivative data."""
    if r <= 0:
        return np.zeros(k_max), np.zeros(k_max)
    _need(field, 2 * k_max)
    t, _ = gauss_unit(n_nodes)
    D = field.derivs_p(p, r * t, 2 * k_max)
    M = float(field.value(p, r))
    a = np.empty(k_max)
    b = np.empty(k_max)
    for k in range(1, k_max + 1):
        acc = 2.0 * M
        for i in range(k + 1):
            acc += r ** (2 * i) * (weighted_kernel(tables, "A", k, i, n_nodes) @ D[:, 2 * i])
        a[k - 1] = acc
        acc = 0.0
        for i in range(1, k + 1):
            acc += r ** (2 * i - 1) * (weighted_kernel(tables, "B", k, i, n_nodes) @ D[:, 2 * i - 1])
        b[k - 1] = acc
    return a, b


def a_even_lemma(tables: CoeffTables, field, p: float, r: float, k: int, n_nodes: int = 128) -> float:
    """``a_{2k}(p, r) = 2 Mf + sum_{i=0}^k r^(2i) int_0^1 A_{2k,2i}(t) d_p^(2i) Mf(p, rt) dt``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if r <= 0:
        return 0.0
    _need(field, 2 * k)
    t, _ = gauss_unit(n_nodes)
    D = field.derivs_p(p, r * t, 2 * k)
    acc = 2.0 * float(field.value(p, r))
    for i in range(k + 1):
        acc += r ** (2 * i) * (weighted_kernel(tables, "A", k, i, n_nodes) @ D[:, 2 * i])
    return float(acc)


def b_odd_lemma(tables: CoeffTables, field, p: float, r: float, k: int, n_nodes: int = 128) -> float:
    """``b_{2k-1}(p, r) = sum_{i=1}^k r^(2i-1) int_0^1 B_{2k-1,2i-1}(t) d_p^(2i-1) Mf(p, rt) dt``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if r <= 0:
        return 0.0
    _need(field, 2 * k - 1)
    t, _ = gauss_unit(n_nodes)
    D = field.derivs_p(p, r * t, 2 * k - 1)
    acc = 0.0
    for i in range(1, k + 1):
        acc += r ** (2 * i - 1) * (weighted_kernel(tables, "B", k, i, n_nodes) @ D[:, 2 * i - 1])
    return float(acc)


# ---------------------------------------------------------------------------
# nested radial recursions


@lru_cache(maxsize=8)
def _volterra_setup(n_cheb: int, n_gauss: int):
    """Chebyshev-Lobatto nodes on [0, 1] and the interpolation tensor.

    ``L[l, q, m]`` is the ``m``-th Lagrange basis polynomial evaluated at
    ``s_l * tau_q``, so that ``sum_m L[l, q, m] g(s_m) ~ g(s_l tau_q)``.
    """
    j = np.arange(n_cheb)
    s = 0.5 * (1.0 - np.cos(np.pi * j / (n_cheb - 1)))
    bw = (-1.0) ** j
    bw[0] *= 0.5
    bw[-1] *= 0.5
    tau, wg = gauss_unit(n_gauss)
    z = (s[:, None] * tau[None, :]).ravel()
    diff = z[:, None] - s[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = bw[None, :] / diff
        L = c / c.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    L[rows] = exact[rows].astype(float)
    return s, L.reshape(n_cheb, n_gauss, n_cheb), tau, wg


def volterra_matrix(alpha: int, n_cheb: int, n_gauss: int) -> np.ndarray:
    """Matrix of ``g -> (u -> int_0^1 t^alpha g(u t) dt)`` on the Chebyshev nodes."""
    _, L, tau, wg = _volterra_setup(n_cheb, n_gauss)
    return np.einsum("lqm,q->lm", L, wg * tau**alpha)


def coeffs_recursive(field, p: float, r: float, k_max: int, n_cheb: int = 64, n_gauss: int = 64,
                     max_depth: int = RECURSION_DEPTH) -> tuple[np.ndarray, np.ndarray]:
    """``a_2..a_{2 k_max}`` and ``b_1..b_{2 k_max - 1}`` by the nested integral recursions.

    With ``V_alpha g(u) = int_0^1 t^alpha g(u t) dt`` the radial systems read

        b_{2k-1} = V_{2k-2}[-2u M_p - 2 sum_{j<k} (2j-1) b_{2j-1} - 2u sum_{j<k} d_p a_{2j}]
        a_{2k}   = V_{2k-1}[ 2u M_u - 4 sum_{j<k} j a_{2j}        + 2u sum_{j<=k} d_p b_{2j-1}]

    Every coefficient is carried as a function of ``u`` on Chebyshev-Lobatto
    nodes of ``[0, r]``, together with the p-derivatives the later levels
    consume (obtained by running the same recursion on ``d_p^d Mf``).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if k_max > max_depth:
        raise RecursionDepthError(f"k_max = {k_max} exceeds the recursion depth limit {max_depth}")
    if r <= 0:
        return np.zeros(k_max), np.zeros(k_max)
    top = 2 * k_max
    _need(field, top)
    s, _, _, _ = _volterra_setup(n_cheb, n_gauss)
    u = r * s
    Dp = field.derivs_p(p, u, top)
    Dr = field.derivs_r(p, u, top - 2)
    V = {alpha: volterra_matrix(alpha, n_cheb, n_gauss) for alpha in range(2 * k_max)}
    a: dict[tuple[int, int], np.ndarray] = {}
    b: dict[tuple[int, int], np.ndarray] = {}
    for k in range(1, k_max + 1):
        for d in range(top - (2 * k - 1) + 1):
            g = -2.0 * u * Dp[:, d + 1]
            for j in range(1, k):
                g = g - 2.0 * (2 * j - 1) * b[j, d] - 2.0 * u * a[j, d + 1]
            b[k, d] = V[2 * k - 2] @ g
        for d in range(top - 2 * k + 1):
            h = 2.0 * u * Dr[:, d]
            for j in range(1, k):
                h = h - 4.0 * j * a[j, d]
            for j in range(1, k + 1):
                h = h + 2.0 * u * b[j, d + 1]
            a[k, d] = V[2 * k - 1] @ h
    return (np.array([a[k, 0][-1] for k in range(1, k_max + 1)]),
            np.array([b[k, 0][-1] for k in range(1, k_max + 1)]))


# ---------------------------------------------------------------------------
# reconstruction


def reconstruct_point(tables: CoeffTables, field, x: float, y: float, cfg: SeriesConfig = SeriesConfig(),
                      f_true: float | None = None) -> ReconstructionReport:
    """Partial sums ``f_0..f_{n_max}`` at ``(x, y)``.

    ``y == 0`` lies on the detector line, where ``f`` vanishes by hypothesis;
    the report then holds zeros and ``on_line`` is set.
    """
    start = time.perf_counter()
    n_max = cfg.n_max
    if y < 0:
        raise ValueError("reconstruction points must satisfy y >= 0")
    if y == 0:
        return ReconstructionReport(x, y, np.zeros(n_max + 1), cfg.formula, f_true, True,
                                    time.perf_counter() - start)
    _need(field, 2 * n_max)
    t, _ = gauss_unit(cfg.quad_nodes_u)
    D = field.derivs_p(x, y * t, 2 * n_max)
    M = float(field.value(x, y))
    Z = z_weight_stack(tables, n_max, cfg.quad_nodes_u)
    scale = y ** (2.0 * np.arange(n_max + 1))
    terms = np.einsum("niq,qi->ni", Z, D[:, 0::2]) * scale
    sums = terms.sum(axis=1)
    n = np.arange(n_max + 1)
    if cfg.formula == "corrected":
        values = 2.0 * (2 * n + 1) * M + 2.0 * sums
    else:
        values = 2.0 * (n + 1) * M + sums
    return ReconstructionReport(x, y, values, cfg.formula, f_true, False, time.perf_counter() - start)


def reconstruct_points(tables: CoeffTables, field, points: Sequence[tuple[float, float]],
                       cfg: SeriesConfig = SeriesConfig(), workers: int = 1) -> np.ndarray:
    """``(len(points), n_max+1)`` partial sums; identical for any ``workers``."""
    z_weight_stack(tables, cfg.n_max, cfg.quad_nodes_u)

    def one(pt):
        return reconstruct_point(tables, field, float(pt[0]), float(pt[1]), cfg).values

    if workers <= 1:
        rows = [one(pt) for pt in points]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, points))
    return np.array(rows, dtype=float).reshape(len(rows), cfg.n_max + 1)


# ---------------------------------------------------------------------------
# consistency identity and locality


def flag_derivatives(phantom: Phantom, p: float, r: float, phi: float) -> tuple[float, float, float]:
    """``(g_p, g_r, g_phi)`` of ``g(p, r, phi) = f(p - r sin(phi), r cos(phi))`` by the chain rule."""
    s, c = np.sin(phi), np.cos(phi)
    x, y = p - r * s, r * c
    fx = phantom_deriv(phantom, x, y, 1)
    fy = phantom_deriv(phantom, x, y, 0, dy=True)
    return fx, -s * fx + c * fy, -r * c * fx - r * s * fy


def consistency_terms(phantom: Phantom, p: float, r: float, phi: float, form: str = "corrected") -> tuple[float, float, float]:
    g_p, g_r, g_phi = flag_derivatives(phantom, p, r, phi)
    s, c = np.sin(phi), np.cos(phi)
    if form == "corrected":
        w = c
    elif form == "literal":
        w = c - r
    else:
        raise ValueError(f"unknown form {form!r}")
    return r * g_p, r * s * g_r, w * g_phi


def consistency_residual(phantom: Phantom, p: float, r: float, phi: float, form: str = "corrected") -> float:
    """``r g_p + r sin(phi) g_r + cos(phi) g_phi``, zero for any function of ``(x, y)``.

    ``form="literal"`` replaces the last weight by ``cos(phi) - r``.
    """
    return float(sum(consistency_terms(phantom, p, r, phi, form)))


def consistency_scale(phantom: Phantom, p: float, r: float, phi: float) -> float:
    """Sum of the magnitudes of the three terms, the natural size of the residual."""
    return float(sum(abs(v) for v in consistency_terms(phantom, p, r, phi)))


def locality_probe(tables: CoeffTables, field_a, field_b, x: float, y: float,
                   cfg: SeriesConfig = SeriesConfig()) -> float:
    """Largest ``|f_n(x, y; a) - f_n(x, y; b)|`` over ``n <= n_max``."""
    va = reconstruct_point(tables, field_a, x, y, cfg).values
    vb = reconstruct_point(tables, field_b, x, y, cfg).values
    return float(np.max(np.abs(va - vb)))


@dataclass(frozen=True, eq=False)
class SumField:
    """Pointwise sum of two data providers (handy for locality experiments)."""

    first: object
    second: object
    derivative_mode: str = field(default="analytic", init=False)

    @property
    def max_derivative(self) -> int:
        return min(self.first.max_derivative, self.second.max_derivative)

    def value(self, p, r):
        return self.first.value(p, r) + self.second.value(p, r)

    def derivs_p(self, p, radii, dmax):
        return self.first.derivs_p(p, radii, dmax) + self.second.derivs_p(p, radii, dmax)

    def derivs_r(self, p, radii, dmax=0):
        return self.first.derivs_r(p, radii, dmax) + self.second.derivs_r(p, radii, dmax)
