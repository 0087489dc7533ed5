"""Approximating chaos measures built from sampled fields.

Box masses are trapezoid sums ``h * sum e^{omega(t_k)}`` with half weight at
the two end nodes, computed as differences of one cumulative array so that
masses of adjacent boxes add up.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .families import Cone
from .fields import FieldSample, Grid, sample_band
from .rng import stream

__all__ = [
    "ResolutionError",
    "MeasureSample",
    "cumulative_mass",
    "snap",
    "measure_boxes",
    "cascade_sample",
    "cascade_replicas",
    "dyadic_mass_table",
]


class ResolutionError(ValueError):
    """The grid cannot resolve the requested cutoff or box scale."""


@dataclass
class MeasureSample:
    boxes: list
    ladder: np.ndarray
    masses: np.ndarray          # (len(ladder), len(boxes))
    grid: Grid
    cum: np.ndarray             # cumulative mass at the deepest cutoff
    seed: int
    replica: int
    spec: Cone


def cumulative_mass(values: np.ndarray, step: float) -> np.ndarray:
    dens = np.exp(values)
    out = np.empty(len(dens))
    out[0] = 0.0
    np.cumsum(0.5 * step * (dens[1:] + dens[:-1]), out=out[1:])
    return out


def snap(grid: Grid, x: float) -> int:
    """Index of the grid node nearest to ``x``; raises if ``x`` lies off the grid."""
    k = (x - grid.origin) / grid.step
    tol = 1e-9
    if k < -tol or k > grid.n_points - 1 + tol:
        raise ValueError(f"point {x} lies outside the grid [{grid.origin}, {grid.end}]")
    return int(min(max(round(k), 0), grid.n_points - 1))


def _box_masses(cum: np.ndarray, grid: Grid, boxes) -> np.ndarray:
    out = np.empty(len(boxes))
    for i, (lo, hi) in enumerate(boxes):
        out[i] = cum[snap(grid, hi)] - cum[snap(grid, lo)]
    return out


def measure_boxes(field: FieldSample, boxes) -> np.ndarray:
    """Masses ``m(box)`` of the measure with density ``exp(field)``."""
    return _box_masses(cumulative_mass(field.values, field.grid.step), field.grid, boxes)


def _ladder(T: float, eps_ratio: float, depth: int) -> np.ndarray:
    if not 0 < eps_ratio < 1:
        raise ValueError("eps_ratio must lie in (0, 1)")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return T * eps_ratio ** np.arange(depth + 1)


def cascade_sample(spec: Cone, eps_ratio: float, depth: int, grid: Grid, boxes,
                   seed: int, replica: int = 0, lane: int = 0,
                   stable_delta: Optional[float] = None) -> MeasureSample:
    """Masses at the cutoffs ``l_n = T eps_ratio^n``, ``n = 0..depth``.

    Level ``n`` multiplies level ``n - 1`` by one more independent scale band
    ``[l_n, l_{n-1}]`` drawn from ``stream(seed, replica, n - 1, lane)``;
    the deepest level therefore coincides with
    ``sample_cone_field(spec, grid, l_depth, seed, replica, eps_ratio)``.
    """
    ladder = _ladder(spec.T, eps_ratio, depth)
    if ladder[-1] < 8 * grid.step * (1 - 1e-12):
        raise ResolutionError(
            f"deepest cutoff {ladder[-1]:.3g} is below 8 grid steps ({8 * grid.step:.3g})")
    boxes = [(float(a), float(b)) for a, b in boxes]
    omega = np.zeros(grid.n_points)
    masses = np.empty((depth + 1, len(boxes)))
    cum = cumulative_mass(omega, grid.step)
    masses[0] = _box_masses(cum, grid, boxes)
    for n in range(1, depth + 1):
        rng = stream(seed, replica, n - 1, lane)
        omega += sample_band(spec.triplet, grid, ladder[n], ladder[n - 1], rng, stable_delta)
        cum = cumulative_mass(omega, grid.step)
        masses[n] = _box_masses(cum, grid, boxes)
    return MeasureSample(boxes, ladder, masses, grid, cum, seed, replica, spec)


def cascade_replicas(spec: Cone, eps_ratio: float, depth: int, grid: Grid, boxes,
                     seed: int, n_replicas: int, threads: int = 1, lane: int = 0,
                     keep_cum: bool = True, stable_delta: Optional[float] = None):
    """Independent replicas ``0..n_replicas-1``; the result does not depend on ``threads``."""
    def one(r):
        s = cascade_sample(spec, eps_ratio, depth, grid, boxes, seed, r, lane, stable_delta)
        if not keep_cum:
            s.cum = None
        return s

    if threads <= 1:
        return [one(r) for r in range(n_replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(n_replicas)))


def dyadic_mass_table(sample: MeasureSample, max_level: int) -> list[np.ndarray]:
    """Masses of ``[k 2^-j, (k+1) 2^-j]`` for ``j = 0..max_level`` at the deepest cutoff."""
    grid = sample.grid
    if sample.cum is None:
        raise ValueError("sample was stored without its cumulative mass")
    if grid.origin > 1e-12 or grid.end < 1 - 1e-12:
        raise ValueError("dyadic tables need a grid covering [0, 1]")
    if 2.0 ** -max_level < 8 * grid.step * (1 - 1e-12):
        raise ResolutionError(
            f"dyadic level {max_level} is finer than 8 grid steps ({8 * grid.step:.3g})")
    table = []
    for j in range(max_level + 1):
        idx = np.array([snap(grid, k * 2.0 ** -j) for k in range(2 ** j + 1)])
        table.append(np.diff(sample.cum[idx]))
    return table
