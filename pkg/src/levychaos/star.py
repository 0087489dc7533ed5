"""Checks of star scale invariance.

Exponent level: for window generators (cone and moving-average families) the
generator's p-point exponent

    H(t, Q) = int phi(h * sum_j q_j 1{|r - t_j| <= w/2}) dr

is computed exactly from the arrangement of the ``p`` windows, and the
cut-off exponent ``eta^eps(t, Q) = int_1^{1/eps} H(g(y) t, Q) dy / y`` by
adaptive quadrature in ``ln y``.

Measure level: :func:`star_mc_test` compares the deep-cutoff cone measure
with the product of an independent top band and an independent rescaled
copy of the deep measure.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .families import (Cone, GeneratorSpec, Linear, SpectralGaussian, generalized_covariance,
                       rate_power, window)
from .fields import Grid, QuadratureError, sample_band, sample_cone_field
from .kernel import char_exponent, laplace_exponent
from .measure import _box_masses, cumulative_mass
from .rng import LANE_BAND, LANE_LHS, LANE_RHS, stream

__all__ = [
    "ExponentQuery",
    "generator_exponent_H",
    "eta_epsilon",
    "composition_residual",
    "remark17_check",
    "Remark17Report",
    "StarTestReport",
    "star_mc_samples",
    "star_report",
    "star_mc_test",
    "random_queries",
]


@dataclass(frozen=True)
class ExponentQuery:
    points: tuple
    weights: tuple
    mode: str = "char"     # "char" (Lévy exponent) or "laplace"

    def __post_init__(self):
        pts = tuple(float(t) for t in self.points)
        qs = tuple(float(q) for q in self.weights)
        if len(pts) < 1 or len(pts) != len(qs):
            raise ValueError("query needs p >= 1 points and as many weights")
        if not all(map(math.isfinite, pts + qs)):
            raise ValueError("query entries must be finite")
        if self.mode not in ("char", "laplace"):
            raise ValueError(f"unknown exponent mode {self.mode!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", qs)

    def scaled(self, factor: float) -> "ExponentQuery":
        return ExponentQuery(tuple(t * factor for t in self.points), self.weights, self.mode)


def _point_exponent(spec, x, mode):
    if mode == "char":
        return char_exponent(spec.triplet, x)
    val = laplace_exponent(spec.triplet, x)
    if math.isinf(val):
        raise ValueError(f"Laplace exponent diverges at {x}")
    return val


def _window_H(spec, points, weights, mode):
    h, w = window(spec)
    lo = [t - w / 2 for t in points]
    hi = [t + w / 2 for t in points]
    cuts = sorted(lo + hi)
    total = 0j if mode == "char" else 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        s = 0.0
        for j, q in enumerate(weights):
            if lo[j] <= mid <= hi[j]:
                s += q
        if s != 0.0:
            total += (b - a) * _point_exponent(spec, h * s, mode)
    return total


def _spectral_H(spec: SpectralGaussian, points, weights, mode):
    q = np.asarray(weights)
    t = np.asarray(points)
    cov = generalized_covariance(spec, np.subtract.outer(t, t))
    quad_form = float(q @ cov @ q)
    lin = spec.drift_b * q.sum()
    if mode == "char":
        return complex(1j * lin - 0.5 * quad_form)
    return lin + 0.5 * quad_form


def generator_exponent_H(spec: GeneratorSpec, query: ExponentQuery):
    """p-point exponent of the generator at the query points."""
    if isinstance(spec, SpectralGaussian):
        return _spectral_H(spec, query.points, query.weights, query.mode)
    return _window_H(spec, query.points, query.weights, query.mode)


def _kinks(spec, query, v_max):
    """Values of ``ln y`` where two windows start or stop overlapping."""
    if isinstance(spec, SpectralGaussian):
        return []
    w = window(spec)[1]
    qpow = rate_power(spec.rate)
    out = set()
    pts = query.points
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            dist = abs(pts[i] - pts[j])
            if dist > 0:
                v = math.log(w / dist) / qpow
                if 0 < v < v_max:
                    out.add(v)
    return sorted(out)


def _quad(f, a, b, points, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, points=points or None, epsabs=tol,
                                      epsrel=1e-13, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from None
    return val


def eta_epsilon(spec: GeneratorSpec, query: ExponentQuery, eps: float, tol: float = 1e-13):
    """``eta^eps(t, Q) = int_1^{1/eps} H(g(y) t, Q) dy / y`` (complex in ``char`` mode)."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if eps == 1:
        return 0j if query.mode == "char" else 0.0
    qpow = rate_power(spec.rate)
    v_max = math.log(1.0 / eps)
    pts = np.asarray(query.points)

    def H_at(v):
        return generator_exponent_H(spec, ExponentQuery(tuple(pts * math.exp(qpow * v)),
                                                        query.weights, query.mode))

    kinks = _kinks(spec, query, v_max)
    if query.mode == "laplace":
        return _quad(lambda v: H_at(v), 0.0, v_max, kinks, tol)
    re = _quad(lambda v: H_at(v).real, 0.0, v_max, kinks, tol)
    im = _quad(lambda v: H_at(v).imag, 0.0, v_max, kinks, tol)
    return complex(re, im)


def composition_residual(spec: GeneratorSpec, eps: float, eps_prime: float,
                         queries: Sequence[ExponentQuery]) -> float:
    """``max |eta^{eps eps'}(t) - eta^eps(t) - eta^{eps'}(t / eps)|`` over the queries."""
    if not isinstance(spec.rate, Linear):
        raise ValueError("the composition identity holds for the linear rate only")
    worst = 0.0
    for qy in queries:
        full = eta_epsilon(spec, qy, eps * eps_prime)
        top = eta_epsilon(spec, qy, eps)
        rest = eta_epsilon(spec, qy.scaled(1.0 / eps), eps_prime)
        worst = max(worst, abs(full - top - rest))
    return worst


def random_queries(rng: np.random.Generator, n: int, p: int = 2, spread: float = 2.0,
                   qmax: float = 2.0, mode: str = "char") -> list[ExponentQuery]:
    out = []
    for _ in range(n):
        pts = rng.uniform(-spread / 2, spread / 2, p)
        qs = rng.uniform(-qmax, qmax, p) if mode == "char" else rng.uniform(0, qmax / p, p)
        out.append(ExponentQuery(tuple(pts), tuple(qs), mode))
    return out


@dataclass
class Remark17Report:
    eps0: float
    lhs: complex                  # finite-difference d eta^eps / d eps
    rhs_inv_eps2: complex         # -(1/eps^2) H(t/eps, Q)
    rhs_inv_eps: complex          # -(1/eps) H(t/eps, Q)
    rel_tol: float

    def _match(self, cand):
        scale = max(abs(self.lhs), abs(cand), 1e-300)
        return abs(self.lhs - cand) <= self.rel_tol * scale

    @property
    def matches(self) -> list[str]:
        out = []
        if self._match(self.rhs_inv_eps2):
            out.append("inv_eps2")
        if self._match(self.rhs_inv_eps):
            out.append("inv_eps")
        return out


def remark17_check(spec: GeneratorSpec, query: ExponentQuery, eps0: float,
                   rel_step: float = 1e-4, rel_tol: float = 1e-5) -> Remark17Report:
    """Central difference of ``eps -> eta^eps`` against both candidate prefactors."""
    if not 0 < eps0 < 1:
        raise ValueError("eps0 must lie in (0, 1)")
    h = rel_step * eps0
    lhs = (eta_epsilon(spec, query, eps0 + h) - eta_epsilon(spec, query, eps0 - h)) / (2 * h)
    H = generator_exponent_H(spec, query.scaled(1.0 / eps0))
    return Remark17Report(eps0, lhs, -H / eps0 ** 2, -H / eps0, rel_tol)


# -- Monte Carlo ----------------------------------------------------------------

@dataclass
class StarTestReport:
    boxes: list
    ks_stat: np.ndarray
    ks_p: np.ndarray
    ratios: dict                  # q -> array over boxes
    ratio_se: dict
    alpha: float
    n_replicas: int
    misscaled: bool = False
    qs: tuple = (0.5, 1.0, 1.5)

    @property
    def ks_passed(self) -> bool:
        return bool(np.all(self.ks_p >= self.alpha / len(self.boxes)))

    @property
    def mean_passed(self) -> bool:
        r, se = self.ratios[1.0], self.ratio_se[1.0]
        return bool(np.all(np.abs(r - 1.0) <= 3 * se))

    @property
    def passed(self) -> bool:
        return self.ks_passed and self.mean_passed

    def rows(self):
        for i, (lo, hi) in enumerate(self.boxes):
            row = {"box_lo": lo, "box_hi": hi, "ks_stat": self.ks_stat[i], "ks_p": self.ks_p[i]}
            for q in self.qs:
                tag = f"q{int(round(q * 10)):02d}"
                row[f"ratio_{tag}"] = self.ratios[q][i]
            for q in self.qs:
                tag = f"q{int(round(q * 10)):02d}"
                row[f"se_{tag}"] = self.ratio_se[q][i]
            yield row


def _star_replica(spec: Cone, eps, grid, cutoff, boxes, seed, r, stable_delta):
    ratio = eps if eps < 1 else 0.5
    lhs_field = sample_cone_field(spec, grid, cutoff, seed, r, ratio=ratio,
                                  stable_delta=stable_delta, lane=LANE_LHS)
    lhs = _box_masses(cumulative_mass(lhs_field.values, grid.step), grid, boxes)
    band = np.zeros(grid.n_points)
    if eps < 1:
        band = sample_band(spec.triplet, grid, eps * spec.T, spec.T,
                           stream(seed, r, 0, LANE_BAND), stable_delta)
    # M^eps(dt) = exp(omega'(t / eps)) dt with omega' an independent cone field
    # of cutoff l / eps sampled on the dilated grid
    deep = sample_cone_field(spec, grid.scaled(1.0 / eps), cutoff / eps, seed, r, ratio=ratio,
                             stable_delta=stable_delta, lane=LANE_RHS)
    rhs = _box_masses(cumulative_mass(band + deep.values, grid.step), grid, boxes)
    return lhs, rhs


def star_mc_samples(spec: Cone, eps: float, boxes, n_replicas: int, seed: int, grid: Grid,
                    cutoff: float, threads: int = 1, stable_delta: Optional[float] = None):
    """Per-replica box masses of both sides, arrays of shape ``(n_replicas, n_boxes)``."""
    if not isinstance(spec, Cone):
        raise TypeError("the measure-level test is implemented for cone specs")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if cutoff > eps * spec.T:
        raise ValueError("the cutoff must lie below the top band (l <= eps T)")
    boxes = [(float(a), float(b)) for a, b in boxes]

    def one(r):
        return _star_replica(spec, eps, grid, cutoff, boxes, seed, r, stable_delta)

    if threads <= 1:
        res = [one(r) for r in range(n_replicas)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            res = list(pool.map(one, range(n_replicas)))
    lhs = np.array([a for a, _ in res])
    rhs = np.array([b for _, b in res])
    return lhs, rhs


def star_report(lhs: np.ndarray, rhs: np.ndarray, boxes, eps: float, alpha: float = 0.01,
                misscale: bool = False, d: int = 1, qs=(0.5, 1.0, 1.5)) -> StarTestReport:
    """KS on log-mass and moment ratios; ``misscale`` drops the ``eps^d`` factor on the right."""
    if misscale:
        rhs = rhs / eps ** d
    n = lhs.shape[0]
    ks = [stats.ks_2samp(np.log(lhs[:, i]), np.log(rhs[:, i])) for i in range(lhs.shape[1])]
    ratios, ses = {}, {}
    for q in qs:
        a, b = lhs ** q, rhs ** q
        ma, mb = a.mean(axis=0), b.mean(axis=0)
        ratio = ma / mb
        rel = np.sqrt(a.var(axis=0, ddof=1) / (n * ma ** 2) + b.var(axis=0, ddof=1) / (n * mb ** 2))
        ratios[q] = ratio
        ses[q] = ratio * rel
    return StarTestReport(list(boxes), np.array([k.statistic for k in ks]),
                          np.array([k.pvalue for k in ks]), ratios, ses, alpha, n, misscale,
                          tuple(qs))


def star_mc_test(spec: Cone, eps: float, boxes, n_replicas: int, seed: int, grid: Grid,
                 cutoff: float, alpha: float = 0.01, threads: int = 1,
                 misscale: bool = False) -> StarTestReport:
    lhs, rhs = star_mc_samples(spec, eps, boxes, n_replicas, seed, grid, cutoff, threads)
    return star_report(lhs, rhs, boxes, eps, alpha, misscale, spec.dimension)
