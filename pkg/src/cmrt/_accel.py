"""Hot inner loops: numba-compiled when available, pure numpy otherwise.

The backend is picked at import time. Set ``CMRT_DISABLE_NUMBA=1`` to force
the numpy path (useful for debugging and for the benchmark). The two paths
differ only in summation order, so they agree to rounding.

Every ``*_wsum`` routine takes node arrays ``X, Y, W`` of shape ``(R, Q)``
and returns an ``(R, dmax + 1)`` array whose ``[r, d]`` entry is
``sum_q W[r, q] * g_d(X[r, q], Y[r, q])`` where ``g_d`` is the ``d``-th
x-derivative of a unit-amplitude bump (or its y-derivative when ``dy``).
"""
from __future__ import annotations

import os
from math import comb, factorial

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_OFF = {"1", "true", "yes", "on"}
USE_NUMBA = HAS_NUMBA and os.environ.get("CMRT_DISABLE_NUMBA", "").strip().lower() not in _OFF


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_backend(name: str) -> None:
    """Switch between ``"numba"`` and ``"numpy"`` at runtime."""
    global USE_NUMBA
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba is not installed")
        USE_NUMBA = True
    elif name == "numpy":
        USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def polybump_tables(m: int, dmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients for d-th x-derivatives of ``w**m`` with ``w = c - xi**2``.

    ``coef[d, q] = d! / (q! (d-2q)!) * (-1)**q * m! / (m-d+q)!`` (zero when
    the falling factorial runs past ``m``), so that

        d^d/dxi^d w**m = sum_q coef[d, q] * w**(m-d+q) * (-2 xi)**(d-2q).
    """
    coef = np.zeros((dmax + 1, dmax // 2 + 1))
    expo = np.full((dmax + 1, dmax // 2 + 1), -1, dtype=np.int64)
    for d in range(dmax + 1):
        for q in range(d // 2 + 1):
            e = m - d + q
            if e < 0:
                continue
            falling = factorial(m) // factorial(e)
            coef[d, q] = comb(d, 2 * q) * factorial(2 * q) // factorial(q) * (-1) ** q * falling
            expo[d, q] = e
    return coef, expo


# --------------------------------------------------------------------------
# numpy reference implementations


def _gauss_wsum_np(X, Y, W, x0, y0, sigma, dmax, dy):
    xi = (X - x0) / sigma
    eta = (Y - y0) / sigma
    base = W * np.exp(-0.5 * (xi * xi + eta * eta))
    if dy:
        base = base * (-eta / sigma)
    out = np.empty((X.shape[0], dmax + 1))
    h_prev = np.zeros_like(xi)
    h = np.ones_like(xi)
    scale = 1.0
    for d in range(dmax + 1):
        out[:, d] = scale * np.sum(h * base, axis=1)
        h, h_prev = xi * h - d * h_prev, h
        scale *= -1.0 / sigma
    return out


def _polybump_wsum_np(X, Y, W, x0, y0, rho, m, dmax, dy, coef, expo):
    xi = (X - x0) / rho
    eta = (Y - y0) / rho
    w = 1.0 - xi * xi - eta * eta
    inside = w > 0.0
    w = np.where(inside, w, 0.0)
    Wm = np.where(inside, W, 0.0)
    mxi = -2.0 * xi
    out = np.zeros((X.shape[0], dmax + 1))
    for d in range(dmax + 1):
        acc = np.zeros_like(w)
        for q in range(d // 2 + 1):
            e = expo[d, q]
            if e < 0:
                continue
            if dy:
                if e == 0:
                    continue
                term = coef[d, q] * e * w ** (e - 1) * (-2.0 * eta / rho)
            else:
                term = coef[d, q] * w**e
            acc = acc + term * mxi ** (d - 2 * q)
        out[:, d] = np.sum(Wm * acc, axis=1) / rho**d
    return out


def _horner_odd_np(c, t):
    x = t * t
    acc = np.zeros_like(t)
    for cj in c[::-1]:
        acc = acc * x + cj
    return t * acc


def _clenshaw_odd_np(cheb, t):
    return t * np.polynomial.chebyshev.chebval(2.0 * t * t - 1.0, cheb)


# --------------------------------------------------------------------------
# numba implementations

if HAS_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _gauss_wsum_nb(X, Y, W, x0, y0, sigma, dmax, dy):  # pragma: no cover - compiled
        R, Q = X.shape
        out = np.zeros((R, dmax + 1))
        inv = 1.0 / sigma
        for r in range(R):
            for q in range(Q):
                xi = (X[r, q] - x0) * inv
                eta = (Y[r, q] - y0) * inv
                base = W[r, q] * np.exp(-0.5 * (xi * xi + eta * eta))
                if dy:
                    base *= -eta * inv
                h_prev = 0.0
                h = 1.0
                scale = 1.0
                for d in range(dmax + 1):
                    out[r, d] += scale * h * base
                    h_next = xi * h - d * h_prev
                    h_prev = h
                    h = h_next
                    scale *= -inv
        return out

    @numba.njit(cache=True, nogil=True)
    def _polybump_wsum_nb(X, Y, W, x0, y0, rho, m, dmax, dy, coef, expo):  # pragma: no cover
        R, Q = X.shape
        out = np.zeros((R, dmax + 1))
        wpow = np.empty(m + 1)
        mpow = np.empty(dmax + 1)
        for r in range(R):
            for q in range(Q):
                xi = (X[r, q] - x0) / rho
                eta = (Y[r, q] - y0) / rho
                w = 1.0 - xi * xi - eta * eta
                if w <= 0.0:
                    continue
                wpow[0] = 1.0
                for e in range(1, m + 1):
                    wpow[e] = wpow[e - 1] * w
                mpow[0] = 1.0
                for e in range(1, dmax + 1):
                    mpow[e] = mpow[e - 1] * (-2.0 * xi)
                for d in range(dmax + 1):
                    acc = 0.0
                    for k in range(d // 2 + 1):
                        e = expo[d, k]
                        if e < 0:
                            continue
                        if dy:
                            if e == 0:
                                continue
                            acc += coef[d, k] * e * wpow[e - 1] * (-2.0 * eta / rho) * mpow[d - 2 * k]
                        else:
                            acc += coef[d, k] * wpow[e] * mpow[d - 2 * k]
                    out[r, d] += W[r, q] * acc
        for d in range(dmax + 1):
            s = rho**d
            for r in range(R):
                out[r, d] /= s
        return out

    @numba.njit(cache=True, nogil=True)
    def _horner_odd_nb(c, t):  # pragma: no cover
        out = np.empty_like(t)
        for k in range(t.shape[0]):
            x = t[k] * t[k]
            acc = 0.0
            for j in range(c.shape[0] - 1, -1, -1):
                acc = acc * x + c[j]
            out[k] = t[k] * acc
        return out

    @numba.njit(cache=True, nogil=True)
    def _clenshaw_odd_nb(cheb, t):  # pragma: no cover
        out = np.empty_like(t)
        n = cheb.shape[0]
        for k in range(t.shape[0]):
            s = 2.0 * t[k] * t[k] - 1.0
            b1 = 0.0
            b2 = 0.0
            for j in range(n - 1, 0, -1):
                b0 = cheb[j] + 2.0 * s * b1 - b2
                b2 = b1
                b1 = b0
            out[k] = t[k] * (cheb[0] + s * b1 - b2)
        return out


# --------------------------------------------------------------------------
# dispatch


def gauss_wsum(X, Y, W, x0, y0, sigma, dmax, dy=False):
    args = (np.ascontiguousarray(X, float), np.ascontiguousarray(Y, float), np.ascontiguousarray(W, float))
    if USE_NUMBA:
        return _gauss_wsum_nb(*args, float(x0), float(y0), float(sigma), int(dmax), bool(dy))
    return _gauss_wsum_np(*args, x0, y0, sigma, dmax, dy)


def polybump_wsum(X, Y, W, x0, y0, rho, m, dmax, dy=False):
    coef, expo = polybump_tables(m, dmax)
    args = (np.ascontiguousarray(X, float), np.ascontiguousarray(Y, float), np.ascontiguousarray(W, float))
    if USE_NUMBA:
        return _polybump_wsum_nb(*args, float(x0), float(y0), float(rho), int(m), int(dmax), bool(dy), coef, expo)
    return _polybump_wsum_np(*args, x0, y0, rho, m, dmax, dy, coef, expo)


def horner_odd(c, t):
    c = np.ascontiguousarray(c, float)
    t = np.ascontiguousarray(t, float)
    if c.size == 0:
        return np.zeros_like(t)
    return _horner_odd_nb(c, t) if USE_NUMBA else _horner_odd_np(c, t)


def clenshaw_odd(cheb, t):
    cheb = np.ascontiguousarray(cheb, float)
    t = np.ascontiguousarray(t, float)
    if cheb.size == 0:
        return np.zeros_like(t)
    return _clenshaw_odd_nb(cheb, t) if USE_NUMBA else _clenshaw_odd_np(cheb, t)
