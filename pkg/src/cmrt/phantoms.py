"""Analytic phantoms, the forward circular-mean transform and data providers.

The detector line is the x-axis. The circular mean is

    Mf(p, r) = (1 / 2 pi) int f(p + r sin(phi), r cos(phi)) dphi

and since ``p`` enters only by translation, ``d_p^d Mf = M(d_x^d f)``. Every
quadrature below works on an ``(R, Q)`` block of circle nodes and hands the
inner sum to :mod:`cmrt._accel`.

Gaussians use the periodic trapezoid over the whole circle. Compactly
supported components (``poly_bump``, ``disk_indicator``) use Gauss-Legendre
on the arc of the circle that lies inside the component's support disk, so
the integrand is smooth on the integration interval and no nodes are wasted
outside it.

For circle restrictions and their Fourier coefficients a flag ``(p, r, phi)``
denotes the point ``(p - r sin(phi), r cos(phi))``. The mean is unaffected by
that orientation choice, but odd harmonics change sign with it and this is
the choice under which the radial ODE system holds as written.
"""
from __future__ import annotations

import csv
import json
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from cmrt import _accel

KINDS = ("gaussian", "poly_bump", "disk_indicator")
GAUSSIAN_MAX_DERIVATIVE = 40
GAUSSIAN_SUPPORT_SIGMAS = 8.0
DEFAULT_NODES = 512


class UnsupportedDerivativeError(ValueError):
    """A derivative order (or kind) the data source cannot supply."""


class SupportError(ValueError):
    """A component reaches the detector line."""


@dataclass(frozen=True)
class Bump:
    """One phantom component.

    ``scale`` is the standard deviation of a gaussian, or the support radius
    of ``poly_bump`` (``amplitude * (1 - s^2)^m`` for ``s = dist / scale < 1``)
    and ``disk_indicator``.
    """

    kind: str
    x0: float
    y0: float
    scale: float
    amplitude: float = 1.0
    m: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown component kind {self.kind!r}; expected one of {KINDS}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.kind == "poly_bump" and (int(self.m) != self.m or self.m < 4):
            raise ValueError("poly_bump smoothness m must be an integer >= 4")

    @property
    def max_derivative(self) -> int:
        if self.kind == "gaussian":
            return GAUSSIAN_MAX_DERIVATIVE
        if self.kind == "poly_bump":
            return self.m - 2
        return 0

    def in_upper_half_plane(self) -> bool:
        if self.kind == "gaussian":
            return self.y0 >= GAUSSIAN_SUPPORT_SIGMAS * self.scale
        return self.y0 > self.scale

    def mirrored(self) -> "Bump":
        """Reflection through the detector line with negated amplitude."""
        return replace(self, y0=-self.y0, amplitude=-self.amplitude)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "center": [self.x0, self.y0], "scale": self.scale, "amplitude": self.amplitude}
        if self.kind == "poly_bump":
            out["m"] = self.m
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "Bump":
        try:
            x0, y0 = doc["center"]
            return cls(doc["kind"], float(x0), float(y0), float(doc["scale"]),
                       float(doc.get("amplitude", 1.0)), int(doc.get("m", 10)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed phantom component {doc!r}: {exc}") from None


@dataclass(frozen=True)
class Phantom:
    """A sum of :class:`Bump` components.

    With ``check_support`` (the default) every component must lie in the
    open upper half-plane. Switching it off is only meant for test data such
    as :meth:`odd_mirror`.
    """

    components: tuple[Bump, ...] = ()
    check_support: bool = True

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.check_support:
            for c in self.components:
                if not c.in_upper_half_plane():
                    raise SupportError(f"component {c} is not supported in the upper half-plane")

    @property
    def max_derivative(self) -> int:
        return min((c.max_derivative for c in self.components), default=GAUSSIAN_MAX_DERIVATIVE)

    @property
    def peak(self) -> float:
        """Sum of absolute amplitudes, an upper bound for ``|f|``."""
        return float(sum(abs(c.amplitude) for c in self.components))

    def odd_mirror(self) -> "Phantom":
        """``f(x, y) - f(x, -y)``: odd in ``y``, so its circular means all vanish."""
        return Phantom(self.components + tuple(c.mirrored() for c in self.components), check_support=False)

    def __call__(self, x, y):
        return phantom_deriv(self, x, y, 0)

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Phantom":
        if not isinstance(doc, dict) or not isinstance(doc.get("components"), list):
            raise ValueError("phantom document needs a 'components' list")
        return cls(tuple(Bump.from_dict(c) for c in doc["components"]))


def gaussian(x0: float, y0: float, sigma: float, amplitude: float = 1.0) -> Bump:
    return Bump("gaussian", x0, y0, sigma, amplitude)


def poly_bump(x0: float, y0: float, rho: float, amplitude: float = 1.0, m: int = 10) -> Bump:
    return Bump("poly_bump", x0, y0, rho, amplitude, m)


def disk(x0: float, y0: float, rho: float, amplitude: float = 1.0) -> Bump:
    return Bump("disk_indicator", x0, y0, rho, amplitude)


def reference_phantom() -> Phantom:
    """Unit gaussian, sigma 0.15, centred at (0.3, 1.2)."""
    return Phantom((gaussian(0.3, 1.2, 0.15),))


def load_phantom(path) -> Phantom:
    with open(path) as fh:
        return Phantom.from_dict(json.load(fh))


def save_phantom(phantom: Phantom, path) -> None:
    with open(path, "w") as fh:
        json.dump(phantom.to_dict(), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# pointwise derivatives


def _check_order(c: Bump, d: int) -> None:
    if d < 0:
        raise UnsupportedDerivativeError("derivative order must be >= 0")
    if d > c.max_derivative:
        raise UnsupportedDerivativeError(f"{c.kind} component supports derivative orders <= {c.max_derivative}, got {d}")


def _component_wsum(c: Bump, X, Y, W, dmax: int, dy: bool = False) -> np.ndarray:
    """``(R, dmax+1)`` weighted node sums of ``d_x^d c`` (or ``d_y d_x^d c``)."""
    if c.kind == "gaussian":
        out = _accel.gauss_wsum(X, Y, W, c.x0, c.y0, c.scale, dmax, dy)
    elif c.kind == "poly_bump":
        out = _accel.polybump_wsum(X, Y, W, c.x0, c.y0, c.scale, c.m, dmax, dy)
    else:
        if dmax > 0 or dy:
            raise UnsupportedDerivativeError("disk_indicator has no derivatives")
        inside = (X - c.x0) ** 2 + (Y - c.y0) ** 2 <= c.scale**2
        out = np.sum(np.where(inside, W, 0.0), axis=1)[:, None]
    return c.amplitude * out


def phantom_deriv(phantom: Phantom, x, y, d: int, dy: bool = False):
    """``d_x^d f(x, y)`` summed over components (``d_y d_x^d f`` when ``dy``)."""
    xa, ya = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    X = xa.reshape(-1, 1)
    Y = ya.reshape(-1, 1)
    W = np.ones_like(X)
    out = np.zeros(X.shape[0])
    for c in phantom.components:
        _check_order(c, d + (1 if dy else 0))
        out += _component_wsum(c, X, Y, W, d, dy)[:, d]
    if xa.ndim == 0:
        return float(out[0])
    return out.reshape(xa.shape)


# ---------------------------------------------------------------------------
# circle quadrature


def trapezoid_angles(n: int) -> np.ndarray:
    return -np.pi + 2.0 * np.pi * np.arange(n) / n


def arc_half_angles(p, r, x0: float, y0: float, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Centre angle and half-width of the arc of circle ``(p, r)`` inside a disk.

    Angles follow the ``(p + r sin(phi), r cos(phi))`` parametrization. The
    half-width is 0 when the circle misses the disk and pi when the disk
    contains the whole circle. The chord is located from the radical line of
    the two circles.
    """
    p = np.asarray(p, float)
    r = np.asarray(r, float)
    dx = x0 - p
    dist = np.hypot(dx, y0)
    centre = np.arctan2(dx, y0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (r * r - rho * rho + dist * dist) / (2.0 * dist)
        h = np.sqrt(np.maximum(r * r - a * a, 0.0))
        half = np.arctan2(h, a)
    half = np.where(dist >= r + rho, 0.0, half)
    half = np.where(r >= dist + rho, 0.0, half)
    half = np.where(rho >= dist + r, np.pi, half)
    half = np.where(r == 0.0, np.where(dist < rho, np.pi, 0.0), half)
    return centre, half


def _circle_nodes(c: Bump, p, r, n_nodes: int):
    """Nodes ``X, Y``, angles and mean weights on circles ``(p_j, r_j)``."""
    R = r.shape[0]
    if c.kind == "gaussian":
        phi = np.broadcast_to(trapezoid_angles(n_nodes), (R, n_nodes))
        W = np.full((R, n_nodes), 1.0 / n_nodes)
    else:
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        centre, half = arc_half_angles(p, r, c.x0, c.y0, c.scale)
        phi = centre[:, None] + half[:, None] * x[None, :]
        W = half[:, None] * w[None, :] / (2.0 * np.pi)
    s, co = np.sin(phi), np.cos(phi)
    X = p[:, None] + r[:, None] * s
    Y = r[:, None] * co
    return X, Y, W, s, co


def _prepare(p, r):
    p = np.asarray(p, float)
    r = np.asarray(r, float)
    scalar = p.ndim == 0 and r.ndim == 0
    p, r = np.broadcast_arrays(np.atleast_1d(p), np.atleast_1d(r))
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    return p.ravel().astype(float), r.ravel().astype(float), scalar


def mean_derivatives(phantom: Phantom, p, r, dmax: int, n_nodes: int = DEFAULT_NODES) -> np.ndarray:
    """``(R, dmax+1)`` array of ``d_p^d Mf(p_j, r_j)``."""
    if n_nodes < 16:
        raise ValueError("n_nodes must be >= 16")
    p, r, _ = _prepare(p, r)
    out = np.zeros((r.shape[0], dmax + 1))
    for c in phantom.components:
        _check_order(c, dmax)
        X, Y, W, _, _ = _circle_nodes(c, p, r, n_nodes)
        out += _component_wsum(c, X, Y, W, dmax)
    return out


def mean_radial_derivatives(phantom: Phantom, p, r, dmax: int = 0, n_nodes: int = DEFAULT_NODES) -> np.ndarray:
    """``(R, dmax+1)`` array of ``d_r d_p^d Mf``, differentiating under the integral.

    With the node direction ``omega = (sin(phi), cos(phi))`` this is the mean
    of ``grad(d_x^d f) . omega``. For compact components the integrand
    vanishes at the arc ends, so moving endpoints add nothing.
    """
    if n_nodes < 16:
        raise ValueError("n_nodes must be >= 16")
    p, r, _ = _prepare(p, r)
    out = np.zeros((r.shape[0], dmax + 1))
    for c in phantom.components:
        _check_order(c, dmax + 1)
        X, Y, W, s, co = _circle_nodes(c, p, r, n_nodes)
        out += _component_wsum(c, X, Y, W * s, dmax + 1)[:, 1:]
        out += _component_wsum(c, X, Y, W * co, dmax, dy=True)
    return out


def forward_mean(phantom: Phantom, p, r, n_nodes: int = DEFAULT_NODES):
    """Circular mean ``Mf(p, r)``; scalar in, scalar out."""
    _, _, scalar = _prepare(p, r)
    vals = mean_derivatives(phantom, p, r, 0, n_nodes)[:, 0]
    if scalar:
        return float(vals[0])
    return vals.reshape(np.broadcast(np.asarray(p), np.asarray(r)).shape)


def forward_sinogram(phantom: Phantom, p_grid, r_grid, n_nodes: int = DEFAULT_NODES) -> np.ndarray:
    """``Mf`` on the product grid, shape ``(len(p_grid), len(r_grid))``."""
    P, Rg = np.meshgrid(np.asarray(p_grid, float), np.asarray(r_grid, float), indexing="ij")
    return mean_derivatives(phantom, P.ravel(), Rg.ravel(), 0, n_nodes)[:, 0].reshape(P.shape)


# ---------------------------------------------------------------------------
# restriction to a circle and its Fourier coefficients


def restriction(phantom: Phantom, p: float, r: float, phi) -> np.ndarray:
    """``f`` at the flag point ``(p - r sin(phi), r cos(phi))``."""
    phi = np.asarray(phi, float)
    return phantom_deriv(phantom, p - r * np.sin(phi), r * np.cos(phi), 0)


def restriction_fourier(phantom: Phantom, p: float, r: float, k: int, n_nodes: int = DEFAULT_NODES) -> tuple[float, float]:
    """``(a_k, b_k)``: ``(1/pi) int f cos(k phi) dphi`` and the sine analogue."""
    if k < 1:
        raise ValueError("harmonic index must be >= 1")
    phi = trapezoid_angles(n_nodes)
    g = restriction(phantom, p, r, phi)
    return float(2.0 * np.mean(g * np.cos(k * phi))), float(2.0 * np.mean(g * np.sin(k * phi)))


def restriction_series(phantom: Phantom, p: float, r: float, k_max: int, n_nodes: int = DEFAULT_NODES):
    """All harmonics ``0..k_max`` at once via the FFT: arrays ``a, b``.

    ``a[0]`` is twice the circle mean, matching the ``(1/pi)`` normalization.
    """
    if k_max >= n_nodes // 2:
        raise ValueError("k_max must be below n_nodes / 2")
    phi = trapezoid_angles(n_nodes)
    F = np.fft.rfft(restriction(phantom, p, r, phi))[: k_max + 1]
    sign = (-1.0) ** np.arange(k_max + 1)
    F = sign * F * (2.0 / n_nodes)
    return F.real.copy(), -F.imag.copy()


# ---------------------------------------------------------------------------
# data providers


@dataclass(frozen=True, eq=False)
class AnalyticField:
    """Exact-derivative mean data of an analytic phantom."""

    phantom: Phantom
    n_nodes: int = DEFAULT_NODES
    derivative_mode: str = field(default="analytic", init=False)

    @property
    def max_derivative(self) -> int:
        return self.phantom.max_derivative

    @property
    def peak(self) -> float:
        return self.phantom.peak

    def value(self, p, r):
        return forward_mean(self.phantom, p, r, self.n_nodes)

    def derivs_p(self, p: float, radii, dmax: int) -> np.ndarray:
        return mean_derivatives(self.phantom, p, radii, dmax, self.n_nodes)

    def derivs_r(self, p: float, radii, dmax: int = 0) -> np.ndarray:
        return mean_radial_derivatives(self.phantom, p, radii, dmax, self.n_nodes)


def fd_weights(z: float, nodes: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives ``0..m`` at ``z`` (Fornberg's algorithm).

    Returns ``(m+1, len(nodes))``; row ``k`` applied to samples at ``nodes``
    approximates the ``k``-th derivative at ``z``.
    """
    n = len(nodes)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _window(grid: np.ndarray, z: float, size: int) -> slice:
    if size > grid.shape[0]:
        raise UnsupportedDerivativeError(f"stencil of {size} points exceeds the {grid.shape[0]}-point grid")
    h = grid[1] - grid[0]
    centre = int(round((z - grid[0]) / h))
    start = min(max(centre - size // 2, 0), grid.shape[0] - size)
    return slice(start, start + size)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Mean data sampled on a uniform ``(p, r)`` grid.

    p-derivatives use central Fornberg stencils of the given accuracy order
    (shifted one-sided at the grid edges). Off-grid radii are reached by
    local 4-point Lagrange interpolation, and r-derivatives differentiate
    that interpolant. ``smoothing`` is a gaussian pre-filter width in grid
    cells (0 disables it).
    """

    p: np.ndarray
    r: np.ndarray
    values: np.ndarray
    max_order: int = 8
    accuracy: int = 2
    smoothing: float = 0.0
    derivative_mode: str = field(default="finite_difference", init=False)

    def __post_init__(self):
        p = np.asarray(self.p, float)
        r = np.asarray(self.r, float)
        v = np.asarray(self.values, float)
        if p.ndim != 1 or r.ndim != 1 or v.shape != (p.size, r.size):
            raise ValueError(f"values must have shape (len(p), len(r)); got {v.shape} for {p.size}x{r.size}")
        for name, g in (("p", p), ("r", r)):
            if g.size < 4:
                raise ValueError(f"{name} grid needs at least 4 points")
            steps = np.diff(g)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * abs(steps[0]) * g.size:
                raise ValueError(f"{name} grid must be uniform and increasing")
        if self.smoothing > 0:
            from scipy.ndimage import gaussian_filter

            v = gaussian_filter(v, self.smoothing, mode="nearest")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_csv(cls, path, **kwargs) -> "SampledField":
        p, r, v = read_sinogram_csv(path)
        return cls(p, r, v, **kwargs)

    @property
    def max_derivative(self) -> int:
        return self.max_order

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def _check(self, p: float, radii: np.ndarray) -> None:
        tol = 1e-12 * max(1.0, abs(self.r[-1]))
        if not self.p[0] - tol <= p <= self.p[-1] + tol:
            raise ValueError(f"p = {p} outside the sampled range [{self.p[0]}, {self.p[-1]}]")
        if radii.size and (radii.min() < self.r[0] - tol or radii.max() > self.r[-1] + tol):
            raise ValueError(f"radii outside the sampled range [{self.r[0]}, {self.r[-1]}]")

    def _p_columns(self, p: float, dmax: int) -> np.ndarray:
        """``(dmax+1, len(r))``: d-th p-derivative at ``p`` on every r sample."""
        out = np.empty((dmax + 1, self.r.size))
        for d in range(dmax + 1):
            size = 2 * ((d + 1) // 2) - 1 + self.accuracy if d else 4
            sl = _window(self.p, p, size)
            w = fd_weights(p, self.p[sl], d)[d]
            out[d] = w @ self.values[sl]
        return out

    def _r_apply(self, cols: np.ndarray, radii: np.ndarray, order: int) -> np.ndarray:
        out = np.empty((radii.size, cols.shape[0]))
        for j, u in enumerate(radii):
            sl = _window(self.r, u, 4)
            w = fd_weights(u, self.r[sl], order)[order]
            out[j] = cols[:, sl] @ w
        return out

    def derivs_p(self, p: float, radii, dmax: int) -> np.ndarray:
        if dmax > self.max_order:
            raise UnsupportedDerivativeError(f"sampled data configured for derivative orders <= {self.max_order}")
        radii = np.atleast_1d(np.asarray(radii, float))
        self._check(p, radii)
        return self._r_apply(self._p_columns(p, dmax), radii, 0)

    def derivs_r(self, p: float, radii, dmax: int = 0) -> np.ndarray:
        if dmax > self.max_order:
            raise UnsupportedDerivativeError(f"sampled data configured for derivative orders <= {self.max_order}")
        radii = np.atleast_1d(np.asarray(radii, float))
        self._check(p, radii)
        return self._r_apply(self._p_columns(p, dmax), radii, 1)

    def value(self, p, r):
        vals = self.derivs_p(float(p), r, 0)[:, 0]
        return float(vals[0]) if np.ndim(r) == 0 else vals


def mean_deriv_p(field, p: float, r: float, d: int) -> float:
    """``d_p^d Mf(p, r)`` from any data provider."""
    if d > field.max_derivative:
        raise UnsupportedDerivativeError(f"derivative order {d} exceeds the provider's limit {field.max_derivative}")
    return float(field.derivs_p(p, [r], d)[0, d])


def mean_deriv_r(field, p: float, r: float, d: int = 0) -> float:
    """``d_r d_p^d Mf(p, r)``."""
    return float(field.derivs_r(p, [r], d)[0, d])


# ---------------------------------------------------------------------------
# sinogram files


@contextmanager
def text_sink(target):
    """Yield a writable text stream for a path or an already open stream."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def write_sinogram_csv(target, p_grid: Sequence[float], r_grid: Sequence[float], values: np.ndarray) -> None:
    """Rows ``p,r,mf`` (p-major), 17 significant digits. ``target`` is a path or stream."""
    values = np.asarray(values, float)
    with text_sink(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "r", "mf"])
        for a, pv in enumerate(p_grid):
            for b, rv in enumerate(r_grid):
                w.writerow([f"{pv:.17g}", f"{rv:.17g}", f"{values[a, b]:.17g}"])


def read_sinogram_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["p", "r", "mf"]:
        raise ValueError(f"{path}: expected header 'p,r,mf'")
    try:
        data = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float).reshape(-1, 3)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    p = np.unique(data[:, 0])
    r = np.unique(data[:, 1])
    if data.shape[0] != p.size * r.size:
        raise ValueError(f"{path}: samples do not form a complete (p, r) grid")
    values = np.full((p.size, r.size), np.nan)
    values[np.searchsorted(p, data[:, 0]), np.searchsorted(r, data[:, 1])] = data[:, 2]
    if np.isnan(values).any():
        raise ValueError(f"{path}: duplicate or missing (p, r) samples")
    return p, r, values
