"""Sampling of cut-off log-fields on regular grids.

The cone field ``omega_l(t) = mu(A_l(t))`` is built scale band by scale band:
the strip ``[l, T]`` is cut into ``[T r^{n+1}, T r^n]`` layers, each drawn
from its own random stream, and the layers are summed.  Inside a layer the
Gaussian part is an exact circulant-embedding draw with covariance
``sigma2 * band_overlap`` and the jump part is a Poisson point process of
intensity ``nu(dz) ds y^-2 dy``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate

from .cones import band_overlap
from .families import Cone, GeneratorSpec, SpectralGaussian, generator_psi, rate_power
from .kernel import LevyTriplet, OneSidedStable, PointMass, laplace_exponent
from .rng import stream

__all__ = [
    "Grid",
    "FieldSample",
    "GridWarning",
    "QuadratureError",
    "band_edges",
    "sample_band",
    "sample_cone_field",
    "sample_spectral_field",
    "spectral_covariance",
    "covariance_exact",
    "default_stable_delta",
]


class GridWarning(UserWarning):
    pass


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    origin: float
    step: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("a grid needs at least 2 points")
        if not self.step > 0:
            raise ValueError("grid step must be > 0")

    @classmethod
    def uniform(cls, origin: float, length: float, n_points: int) -> "Grid":
        return cls(float(origin), float(length) / (n_points - 1), int(n_points))

    @property
    def end(self) -> float:
        return self.origin + self.step * (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.n_points)

    def scaled(self, factor: float) -> "Grid":
        return Grid(self.origin * factor, self.step * factor, self.n_points)


@dataclass
class FieldSample:
    grid: Grid
    values: np.ndarray
    cutoff: float
    seed: int
    replica: int
    spec: GeneratorSpec


def band_edges(T: float, l: float, ratio: float) -> list[float]:
    """Scale breakpoints ``T, T r, T r^2, ...`` stopping at ``l`` (last band may be partial)."""
    if not 0 < ratio < 1:
        raise ValueError("band ratio must lie in (0, 1)")
    edges = [T]
    n = 1
    while True:
        y = T * ratio ** n
        if y <= l * (1 + 1e-12):
            break
        edges.append(y)
        n += 1
    if l < T:
        edges.append(l)
    return edges


# -- Gaussian layers ----------------------------------------------------------

def _embedding_size(n: int) -> int:
    m = 1
    while m < 2 * (n - 1):
        m *= 2
    return m


@lru_cache(maxsize=64)
def _band_sqrt_eigs(n: int, step: float, y_lo: float, y_hi: float) -> np.ndarray:
    m = _embedding_size(n)
    lags = np.minimum(np.arange(m), m - np.arange(m)) * step
    c = band_overlap(lags, y_lo, y_hi)
    return _sqrt_eigs(c)


def _sqrt_eigs(c: np.ndarray) -> np.ndarray:
    lam = np.fft.fft(c).real
    if lam.min() < -1e-10 * max(lam.max(), 1e-300):
        raise np.linalg.LinAlgError(
            f"circulant embedding not nonnegative (min eigenvalue {lam.min():.3e})")
    m = len(c)
    return np.sqrt(np.clip(lam, 0.0, None) / m)


def _circulant_draw(sqrt_eigs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    m = len(sqrt_eigs)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(sqrt_eigs * z)[:n].real


# -- jump layers ----------------------------------------------------------------

def default_stable_delta(triplet: LevyTriplet, stable: OneSidedStable, rel: float = 1e-8) -> float:
    """Jump-size threshold below which stable jumps are replaced by their mean.

    Chosen so that the dropped variance ``c delta^{2-a} / (2-a)`` stays below
    ``rel * max(1, |psi(2)|)``.
    """
    scale = max(1.0, abs(laplace_exponent(triplet, 2.0)))
    a = stable.alpha
    return (rel * scale * (2 - a) / stable.c) ** (1.0 / (2 - a))


def _add_windows(acc: np.ndarray, grid: Grid, s: np.ndarray, half: np.ndarray, z) -> None:
    """Add ``z`` to every node with ``|t_k - s| <= half`` (difference-array update)."""
    n = grid.n_points
    lo = np.ceil((s - half - grid.origin) / grid.step).astype(np.int64)
    hi = np.floor((s + half - grid.origin) / grid.step).astype(np.int64) + 1
    lo = np.clip(lo, 0, n)
    hi = np.clip(hi, 0, n)
    keep = hi > lo
    z = np.broadcast_to(z, s.shape)
    np.add.at(acc, lo[keep], z[keep])
    np.add.at(acc, hi[keep], -z[keep])


def _poisson_strip(grid: Grid, y_lo: float, y_hi: float, rate: float, rng):
    """Points ``(s, y)`` of a Poisson process with intensity ``rate ds y^-2 dy``."""
    s_lo = grid.origin - y_hi / 2
    s_hi = grid.end + y_hi / 2
    inv_lo, inv_hi = 1.0 / y_lo, 1.0 / y_hi
    n = rng.poisson(rate * (s_hi - s_lo) * (inv_lo - inv_hi))
    s = rng.uniform(s_lo, s_hi, n)
    y = 1.0 / (inv_lo - rng.uniform(0.0, 1.0, n) * (inv_lo - inv_hi))
    return s, y


def sample_band(triplet: LevyTriplet, grid: Grid, y_lo: float, y_hi: float,
                rng: np.random.Generator, stable_delta: Optional[float] = None) -> np.ndarray:
    """One scale layer ``mu(A_{y_lo, y_hi}(t_k))`` on the grid."""
    n = grid.n_points
    mass = math.log(y_hi / y_lo)
    drift = triplet.drift
    acc = np.zeros(n + 1)
    out = np.zeros(n)
    if triplet.sigma2 > 0:
        eig = _band_sqrt_eigs(n, grid.step, y_lo, y_hi)
        out += math.sqrt(triplet.sigma2) * _circulant_draw(eig, n, rng)
    for j in triplet.jumps:
        if isinstance(j, PointMass):
            if abs(j.z0) <= 1.0:
                drift -= j.rate * j.z0
            s, y = _poisson_strip(grid, y_lo, y_hi, j.rate, rng)
            _add_windows(acc, grid, s, y / 2, j.z0)
        else:
            delta = stable_delta if stable_delta is not None else default_stable_delta(triplet, j)
            a = j.alpha
            drift -= j.c * delta ** (1 - a) / (1 - a)
            s, y = _poisson_strip(grid, y_lo, y_hi, j.c * delta ** (-a) / a, rng)
            x = delta * rng.uniform(0.0, 1.0, len(s)) ** (-1.0 / a)
            _add_windows(acc, grid, s, y / 2, -x)
    out += np.cumsum(acc[:n])
    out += drift * mass
    return out


def _check_resolution(grid: Grid, l: float) -> None:
    if grid.step > l / 8:
        warnings.warn(f"grid step {grid.step:.3g} exceeds l/8 = {l / 8:.3g}", GridWarning,
                      stacklevel=3)


def sample_cone_field(spec: Cone, grid: Grid, l: float, seed: int, replica: int = 0,
                      ratio: float = 0.5, stable_delta: Optional[float] = None,
                      lane: int = 0) -> FieldSample:
    """Cone field ``omega_l`` on ``grid``.

    Band ``k`` (scales ``[edges[k+1], edges[k]]``) is drawn from
    ``stream(seed, replica, k, lane)``.
    """
    if not isinstance(spec, Cone):
        raise TypeError("sample_cone_field needs a Cone spec")
    if not 0 < l <= spec.T:
        raise ValueError(f"cutoff must lie in (0, T], got {l}")
    _check_resolution(grid, l)
    values = np.zeros(grid.n_points)
    edges = band_edges(spec.T, l, ratio)
    for k in range(len(edges) - 1):
        rng = stream(seed, replica, k, lane)
        values += sample_band(spec.triplet, grid, edges[k + 1], edges[k], rng, stable_delta)
    return FieldSample(grid, values, l, seed, replica, spec)


# -- spectral Gaussian fields -----------------------------------------------------

def spectral_covariance(spec: SpectralGaussian, tau, eps: float, tol: float = 1e-10):
    """``C_eps(tau) = int_1^{1/eps} sum_j r_j cos(tau g(y) lambda_j) dy / y`` by quadrature."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    qpow = rate_power(spec.rate)
    upper = eps ** (-qpow)
    taus = np.atleast_1d(np.abs(np.asarray(tau, dtype=float)))
    out = np.empty_like(taus)
    for i, t in enumerate(taus):
        val = 0.0
        for r, lam in spec.atoms:
            w = t * lam
            if w == 0.0:
                val += r * math.log(upper)
                continue
            # g(y) = y^q  =>  dy/y = dv / (q v) with v = y^q
            res, err = integrate.quad(lambda v: 1.0 / v, 1.0, upper, weight="cos", wvar=w,
                                      epsabs=tol, epsrel=0.0, limit=500)
            if not err <= tol * 10:
                raise QuadratureError(f"covariance at tau={t} not resolved (err {err:.2e})")
            val += r * res
        out[i] = val / qpow
    return out if np.ndim(tau) else float(out[0])


@lru_cache(maxsize=16)
def _spectral_sqrt_eigs(spec: SpectralGaussian, n: int, step: float, eps: float):
    m = _embedding_size(n)
    for _ in range(4):
        half = spectral_covariance(spec, np.arange(m // 2 + 1) * step, eps)
        c = np.concatenate([half, half[-2:0:-1]])
        try:
            return "circ", _sqrt_eigs(c)
        except np.linalg.LinAlgError:
            m *= 2
    if n > 4096:
        raise np.linalg.LinAlgError("no nonnegative circulant embedding found")
    lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) * step
    cov = spectral_covariance(spec, lags.ravel(), eps).reshape(n, n)
    w, v = np.linalg.eigh(cov)
    return "eig", v * np.sqrt(np.clip(w, 0.0, None))


def sample_spectral_field(spec: SpectralGaussian, grid: Grid, eps: float, seed: int,
                          replica: int = 0, lane: int = 0) -> FieldSample:
    """Stationary Gaussian field with mean ``(b - psi(1)) ln(1/eps)`` and covariance ``C_eps``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    kind, factor = _spectral_sqrt_eigs(spec, grid.n_points, grid.step, eps)
    rng = stream(seed, replica, 0, lane)
    if kind == "circ":
        vals = _circulant_draw(factor, grid.n_points, rng)
    else:
        vals = factor @ rng.standard_normal(factor.shape[1])
    mean = (spec.drift_b - generator_psi(spec, 1.0)) * math.log(1 / eps)
    return FieldSample(grid, vals + mean, eps, seed, replica, spec)


def covariance_exact(spec: GeneratorSpec, tau, cutoff: float):
    """Exact two-point exponent of the cut-off field.

    Cone: ``(psi(2) - 2 psi(1)) rho_l(tau)``, i.e. ``log E[e^{w(t) + w(t+tau)}]``
    for a normalized triplet.  Spectral: ``C_eps(tau)``.
    """
    if isinstance(spec, Cone):
        c = laplace_exponent(spec.triplet, 2.0) - 2 * laplace_exponent(spec.triplet, 1.0)
        return c * band_overlap(tau, cutoff, spec.T)
    if isinstance(spec, SpectralGaussian):
        return spectral_covariance(spec, tau, cutoff)
    raise TypeError("covariance_exact supports Cone and SpectralGaussian specs")
