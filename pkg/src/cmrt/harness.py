"""Experiment configuration, error metrics and output writers."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from cmrt.exactcoeff import CoeffTables, build_tables
from cmrt.inversion import SeriesConfig, reconstruct_points
from cmrt.phantoms import (
    DEFAULT_NODES,
    AnalyticField,
    Phantom,
    SampledField,
    forward_sinogram,
    reference_phantom,
    text_sink,
)


class ConfigError(ValueError):
    """Malformed experiment configuration."""


@dataclass(frozen=True)
class GridSpec:
    x: tuple[float, float, int] = (0.0, 0.6, 13)
    y: tuple[float, float, int] = (0.9, 1.5, 13)

    def __post_init__(self):
        for name, (lo, hi, n) in (("x", self.x), ("y", self.y)):
            if int(n) != n or n < 2:
                raise ConfigError(f"{name} resolution must be an integer >= 2")
            if not hi > lo:
                raise ConfigError(f"{name} range must be increasing")
        if self.y[0] <= 0:
            raise ConfigError("grid y-range must be strictly positive")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linspace(*self.x[:2], int(self.x[2])), np.linspace(*self.y[:2], int(self.y[2]))

    def points(self) -> list[tuple[float, float]]:
        xs, ys = self.axes()
        return [(float(x), float(y)) for y in ys for x in xs]


@dataclass(frozen=True)
class ExperimentConfig:
    phantom: Phantom = field(default_factory=reference_phantom)
    grid: GridSpec = GridSpec()
    series: SeriesConfig = SeriesConfig()
    n_phi: int = DEFAULT_NODES
    table_order: int = 12
    csv_out: str | None = None
    image_out: str | None = None
    seed: int = 0
    probe_count: int = 5

    def field(self):
        if self.series.derivative_mode == "finite_difference":
            raise ConfigError("finite-difference mode needs sampled data (reconstruct --sinogram)")
        return AnalyticField(self.phantom, self.n_phi)


def _triple(value, name) -> tuple[float, float, int]:
    try:
        lo, hi, n = value
        return float(lo), float(hi), int(n)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be [start, stop, count]") from None


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    kw = {}
    try:
        if "phantom" in doc:
            kw["phantom"] = Phantom.from_dict(doc["phantom"])
        if "grid" in doc:
            g = doc["grid"]
            kw["grid"] = GridSpec(_triple(g.get("x", GridSpec.x), "grid.x"), _triple(g.get("y", GridSpec.y), "grid.y"))
        if "series" in doc:
            kw["series"] = SeriesConfig(**doc["series"])
        for key in ("n_phi", "table_order", "seed", "probe_count"):
            if key in doc:
                kw[key] = int(doc[key])
        out = doc.get("outputs", {})
        kw["csv_out"] = out.get("csv")
        kw["image_out"] = out.get("image")
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class ErrorSummary:
    l2: float
    linf: float
    per_order: dict[int, float] = field(default_factory=dict)


def compute_error(values, reference) -> ErrorSummary:
    """RMS and max-abs difference of two equally shaped grids."""
    v = np.asarray(values, float)
    ref = np.asarray(reference, float)
    if v.shape != ref.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {ref.shape}")
    if v.size == 0:
        return ErrorSummary(0.0, 0.0)
    diff = np.abs(v - ref)
    return ErrorSummary(float(np.sqrt(np.mean(diff**2))), float(diff.max()))


def order_errors(partials: np.ndarray, truth: np.ndarray) -> ErrorSummary:
    """Summary of the last order plus the max-abs error of every order."""
    partials = np.asarray(partials, float)
    truth = np.asarray(truth, float)
    per = {n: compute_error(partials[:, n], truth).linf for n in range(partials.shape[1])}
    last = compute_error(partials[:, -1], truth)
    return ErrorSummary(last.l2, last.linf, per)


def probe_points(seed: int, count: int, centre=(0.3, 1.2), spread: float = 0.15) -> list[tuple[float, float]]:
    """Random probes around ``centre``; the first probe is the centre itself."""
    rng = np.random.default_rng(seed)
    pts = [tuple(map(float, centre))]
    while len(pts) < count:
        dx, dy = rng.uniform(-spread, spread, 2)
        pts.append((float(centre[0] + dx), float(centre[1] + dy)))
    return pts


def convergence_study(tables: CoeffTables, phantom: Phantom, points: Sequence[tuple[float, float]],
                      cfg: SeriesConfig = SeriesConfig(), n_phi: int = DEFAULT_NODES) -> ErrorSummary:
    """Per-order sup error of the partial sums over ``points``."""
    field_ = AnalyticField(phantom, n_phi)
    partials = reconstruct_points(tables, field_, points, cfg)
    truth = np.array([phantom(x, y) for x, y in points])
    return order_errors(partials, truth)


# ---------------------------------------------------------------------------
# runs


def run_grid(cfg: ExperimentConfig, tables: CoeffTables | None = None, field_=None, workers: int = 1,
             with_truth: bool = True):
    """Reconstruct on the configured grid; returns ``(points, partials, truth)``.

    ``field_`` defaults to the analytic data of ``cfg.phantom``; ``truth``
    is ``cfg.phantom`` on the grid, or ``None`` without ``with_truth``.
    """
    tables = tables or build_tables(max(cfg.table_order, cfg.series.n_max))
    field_ = field_ if field_ is not None else cfg.field()
    points = cfg.grid.points()
    partials = reconstruct_points(tables, field_, points, cfg.series, workers)
    truth = np.array([cfg.phantom(x, y) for x, y in points]) if with_truth else None
    return points, partials, truth


def sampled_field_for(phantom: Phantom, p_range, r_range, n_p: int, n_r: int, n_phi: int = DEFAULT_NODES,
                      **kwargs) -> SampledField:
    p = np.linspace(*p_range, n_p)
    r = np.linspace(*r_range, n_r)
    return SampledField(p, r, forward_sinogram(phantom, p, r, n_phi), **kwargs)


# ---------------------------------------------------------------------------
# writers


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_reconstruction_csv(target, points, values, truth=None) -> None:
    """Columns ``x,y,f_n,f_true,abs_err``; ``f_true`` and ``abs_err`` are ``nan`` when unknown."""
    with text_sink(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "f_n", "f_true", "abs_err"])
        for j, (x, y) in enumerate(points):
            v = float(values[j])
            t = float(truth[j]) if truth is not None else float("nan")
            w.writerow([_fmt(x), _fmt(y), _fmt(v), _fmt(t), _fmt(abs(v - t))])


def write_convergence_csv(target, summary: ErrorSummary) -> None:
    with text_sink(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "linf"])
        for n, e in sorted(summary.per_order.items()):
            w.writerow([n, _fmt(e)])


def write_pgm(path, image) -> None:
    """Plain (P2) greyscale image, min-max scaled to 0..255; rows top to bottom."""
    img = np.asarray(image, float)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    lo, hi = float(np.min(img)), float(np.max(img))
    if hi > lo:
        pix = np.rint(255.0 * (img - lo) / (hi - lo)).astype(int)
    else:
        pix = np.zeros(img.shape, dtype=int)
    lines = ["P2", f"{img.shape[1]} {img.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pix]
    Path(path).write_text("\n".join(lines) + "\n")


def grid_image(cfg: ExperimentConfig, values) -> np.ndarray:
    """Reshape per-point values to an image with the largest ``y`` in the top row."""
    nx, ny = int(cfg.grid.x[2]), int(cfg.grid.y[2])
    return np.asarray(values, float).reshape(ny, nx)[::-1]
