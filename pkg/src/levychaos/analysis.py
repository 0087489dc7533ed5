"""Closed-form criteria and multifractal estimators."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from .cones import band_overlap
from .families import (Cone, GeneratorSpec, SpectralGaussian, covariance_support,
                       generalized_covariance, generator_psi, generator_psi_prime,
                       rate_power, window)
from .fields import QuadratureError
from .rng import LANE_BOOT, stream

__all__ = [
    "CriteriaReport",
    "ScalingReport",
    "Assumption2Result",
    "InsufficientScalesError",
    "check_nondegenerate",
    "check_moment_bound",
    "check_second_moment",
    "criteria_report",
    "assumption2_integral",
    "zeta_theoretical",
    "zeta_estimate",
    "pair_exponent",
    "second_moment_exact",
]


class InsufficientScalesError(ValueError):
    pass


def _dim(spec, d):
    return spec.dimension if d is None else d


def check_nondegenerate(spec: GeneratorSpec, d: Optional[int] = None):
    """``(psi'(1) - psi(1) < d, d - (psi'(1) - psi(1)))``."""
    d = _dim(spec, d)
    dpsi = generator_psi_prime(spec, 1.0)
    psi1 = generator_psi(spec, 1.0)
    if math.isinf(dpsi) or math.isinf(psi1):
        return False, -math.inf
    margin = d - (dpsi - psi1)
    return margin > 0, margin


def check_moment_bound(spec: GeneratorSpec, delta: float, d: Optional[int] = None):
    """Necessary condition for a ``1 + delta`` moment: ``psi(1+delta) - (1+delta) psi(1) <= d delta``.

    Returns ``(passes, slack)`` with ``slack = d delta - (psi(1+delta) - (1+delta) psi(1))``.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    d = _dim(spec, d)
    lhs = generator_psi(spec, 1.0 + delta) - (1.0 + delta) * generator_psi(spec, 1.0)
    if math.isinf(lhs):
        return False, -math.inf
    slack = d * delta - lhs
    return slack >= 0, slack


def check_second_moment(spec: GeneratorSpec, d: Optional[int] = None):
    """``(F(0)/q < d, F(0)/q)`` with ``F(0) = psi(2) - 2 psi(1)`` and ``q`` the rate power."""
    d = _dim(spec, d)
    f0 = generator_psi(spec, 2.0) - 2 * generator_psi(spec, 1.0)
    if math.isinf(f0):
        return False, math.inf
    value = f0 / rate_power(spec.rate)
    return value < d, value


@dataclass
class CriteriaReport:
    psi1: float
    psi_prime1: float
    nondegenerate: bool
    margin: float
    moment_checks: dict            # delta -> (passes, slack)
    second_moment_exists: bool
    second_moment_value: float
    assumption2: Optional["Assumption2Result"] = None

    def rows(self):
        yield "psi1", self.psi1
        yield "psi_prime1", self.psi_prime1
        yield "nondegenerate", int(self.nondegenerate)
        yield "nondegenerate_margin", self.margin
        for delta, (ok, slack) in self.moment_checks.items():
            yield f"moment_bound_pass_delta_{delta:g}", int(ok)
            yield f"moment_bound_slack_delta_{delta:g}", slack
        yield "second_moment_exists", int(self.second_moment_exists)
        yield "second_moment_value", self.second_moment_value
        if self.assumption2 is not None:
            yield "log_bound_slope", self.assumption2.slope
            yield "log_bound_residual_sup", self.assumption2.residual_sup

    def summary(self) -> str:
        lines = [
            f"psi(1)             = {self.psi1:.12g}",
            f"psi'(1)            = {self.psi_prime1:.12g}",
            f"nondegenerate      = {self.nondegenerate} (margin {self.margin:.12g})",
        ]
        for delta, (ok, slack) in self.moment_checks.items():
            lines.append(f"moment 1+{delta:g}       = {'pass' if ok else 'fail'} (slack {slack:.12g})")
        state = "exists" if self.second_moment_exists else "does not exist"
        lines.append(f"second moment      = {state} (criterion {self.second_moment_value:.12g})")
        if self.assumption2 is not None:
            a2 = self.assumption2
            lines.append(f"log bound          = slope {a2.slope:.12g}, sup|h| {a2.residual_sup:.6g}")
        return "\n".join(lines)


def criteria_report(spec: GeneratorSpec, deltas=(1.0,), d: Optional[int] = None,
                    x_grid=None) -> CriteriaReport:
    ok, margin = check_nondegenerate(spec, d)
    sm_ok, sm_val = check_second_moment(spec, d)
    a2 = None
    if not isinstance(spec, SpectralGaussian):
        a2 = assumption2_integral(spec, default_x_grid() if x_grid is None else x_grid)
    return CriteriaReport(
        psi1=generator_psi(spec, 1.0),
        psi_prime1=generator_psi_prime(spec, 1.0),
        nondegenerate=ok,
        margin=margin,
        moment_checks={float(dl): check_moment_bound(spec, dl, d) for dl in deltas},
        second_moment_exists=sm_ok,
        second_moment_value=sm_val,
        assumption2=a2,
    )


# -- logarithmic bound on the covariance integral ----------------------------------

@dataclass
class Assumption2Result:
    x: np.ndarray
    values: np.ndarray
    abserr: np.ndarray
    converged: np.ndarray
    slope: float          # Fbar estimate
    intercept: float
    residual_sup: float   # sup |I(x) - fit|, an estimate of sup h


def default_x_grid():
    return np.logspace(-12, -8, 9)


def assumption2_integral(spec: GeneratorSpec, x_grid, a: float = 1.0) -> Assumption2Result:
    """``I(x) = int_a^inf |F(g(u) x)| / u du`` per ``x``, fitted against ``ln(1/|x|)``.

    The integral is taken in ``v = ln u``; for compactly supported ``F`` the
    upper limit is the exact support edge.
    """
    if a < 1:
        raise ValueError("the lower limit a must be >= 1")
    qpow = rate_power(spec.rate)
    support = covariance_support(spec)
    xs = np.abs(np.asarray(x_grid, dtype=float))
    vals = np.empty_like(xs)
    errs = np.empty_like(xs)
    conv = np.ones(len(xs), dtype=bool)
    for i, x in enumerate(xs):
        if x == 0:
            raise ValueError("x must be nonzero")

        def integrand(v, x=x):
            return abs(generalized_covariance(spec, math.exp(qpow * v) * x))

        lo = math.log(a)
        hi = math.log(support / x) / qpow if math.isfinite(support) else math.inf
        if hi <= lo:
            vals[i], errs[i] = 0.0, 0.0
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                vals[i], errs[i] = integrate.quad(integrand, lo, hi, epsabs=1e-12,
                                                  epsrel=1e-13, limit=200)
            except (integrate.IntegrationWarning, OverflowError):
                # F does not decay: the integral diverges
                vals[i], errs[i], conv[i] = math.inf, math.inf, False
    good = conv & np.isfinite(vals)
    if good.sum() >= 2:
        lx = np.log(1.0 / xs[good])
        slope, intercept = np.polyfit(lx, vals[good], 1)
        resid = float(np.max(np.abs(vals[good] - (slope * lx + intercept))))
    else:
        slope = intercept = resid = math.nan
    return Assumption2Result(xs, vals, errs, conv, float(slope), float(intercept), resid)


# -- multifractal spectrum ---------------------------------------------------------

def zeta_theoretical(spec: GeneratorSpec, q: float) -> float:
    """``q - psi(q) + q psi(1)``; ``-inf`` when ``psi(q)`` diverges."""
    psi_q = generator_psi(spec, q)
    if math.isinf(psi_q):
        return -math.inf
    return q - psi_q + q * generator_psi(spec, 1.0)


@dataclass
class ScalingReport:
    q: np.ndarray
    zeta_theory: np.ndarray
    zeta_hat: np.ndarray
    zeta_se: np.ndarray
    r2: np.ndarray
    levels: list
    n_replicas: int
    log_moments: np.ndarray = field(repr=False, default=None)   # (len(q), len(levels))


def _level_moments(tables, q_grid, levels):
    """Per replica, per level: spatial mean of ``m(I_{j,k})^q``."""
    out = np.empty((len(tables), len(q_grid), len(levels)))
    qs = np.asarray(q_grid, dtype=float)
    for r, tab in enumerate(tables):
        for jj, j in enumerate(levels):
            m = tab[j]
            out[r, :, jj] = np.mean(m[None, :] ** qs[:, None], axis=1)
    return out


def _slopes(mean_moments, log_scales):
    x = log_scales - log_scales.mean()
    y = np.log(mean_moments)
    yc = y - y.mean(axis=-1, keepdims=True)
    slope = (yc @ x) / (x @ x)
    fit = slope[..., None] * x
    ss_res = np.sum((yc - fit) ** 2, axis=-1)
    ss_tot = np.sum(yc ** 2, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(ss_tot > 0, 1 - ss_res / ss_tot, 1.0)
    return slope, r2


def zeta_estimate(tables, q_grid, levels=None, spec: Optional[GeneratorSpec] = None,
                  cutoff: Optional[float] = None, n_boot: int = 200, seed: int = 0,
                  min_replicas: int = 50) -> ScalingReport:
    """Regress ``ln mean m(I_{j,k})^q`` on ``ln 2^-j``.

    ``tables`` holds one :func:`dyadic_mass_table` per replica.  Moments are
    averaged over translates ``k`` within each replica, then over replicas.
    Standard errors come from a replica bootstrap.
    """
    if len(tables) < min_replicas:
        raise ValueError(f"need at least {min_replicas} replicas, got {len(tables)}")
    if levels is None:
        levels = list(range(1, len(tables[0])))
        if cutoff is not None:
            jmax = int(math.floor(math.log2(1.0 / (16 * cutoff)))) - 2
            levels = [j for j in levels if j <= jmax]
    levels = list(levels)
    if len(levels) < 4:
        raise InsufficientScalesError(f"need >= 4 dyadic levels, got {levels}")
    if cutoff is not None and 2.0 ** -max(levels) < 16 * cutoff:
        raise InsufficientScalesError(
            f"level {max(levels)} is closer than 16 cutoffs to the cutoff {cutoff:.3g}")
    qs = np.asarray(q_grid, dtype=float)
    per_rep = _level_moments(tables, qs, levels)
    log_scales = -np.asarray(levels, dtype=float) * math.log(2.0)
    mean = per_rep.mean(axis=0)
    slope, r2 = _slopes(mean, log_scales)
    rng = stream(seed, 0, 0, LANE_BOOT)
    n = len(tables)
    boot = np.empty((n_boot, len(qs)))
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        boot[b] = _slopes(per_rep[idx].mean(axis=0), log_scales)[0]
    theory = np.array([zeta_theoretical(spec, q) for q in qs]) if spec is not None \
        else np.full(len(qs), np.nan)
    return ScalingReport(qs, theory, slope, boot.std(axis=0, ddof=1), r2, levels, n,
                         np.log(mean))


# -- second moment ------------------------------------------------------------------

def pair_exponent(spec: GeneratorSpec, tau, cutoff: float = 0.0):
    """``E(tau) = log E[M(dx) M(dy)] / dx dy`` at distance ``tau`` in the limit (or at ``cutoff``).

    Cone: ``(psi(2) - 2 psi(1)) rho_l(tau)`` from exact cone overlaps.
    Other families: ``(1/q) int_tau^inf F(v) dv / v``.
    """
    tau = np.abs(np.asarray(tau, dtype=float))
    if isinstance(spec, Cone):
        c = generator_psi(spec, 2.0) - 2 * generator_psi(spec, 1.0)
        T = spec.T
        if cutoff > 0:
            return c * band_overlap(tau, cutoff, T)
        with np.errstate(divide="ignore"):
            rho = np.where(tau < T, np.log(T / tau) - 1 + tau / T, 0.0)
        return c * rho
    if cutoff > 0:
        raise NotImplementedError("cut-off pair exponents are only closed-form for cones")
    qpow = rate_power(spec.rate)
    if isinstance(spec, SpectralGaussian):
        with np.errstate(divide="ignore"):
            out = sum(-r * special.sici(abs(lam) * tau)[1] for r, lam in spec.atoms)
        return out / qpow
    h, w = window(spec)
    c = generalized_covariance(spec, 0.0) / w
    with np.errstate(divide="ignore"):
        out = np.where(tau < w, c * (w * np.log(w / tau) - w + tau), 0.0)
    return out / qpow


def second_moment_exact(spec: GeneratorSpec, box_length: float = 1.0, cutoff: float = 0.0,
                        d: Optional[int] = None, tol: float = 1e-10) -> float:
    """``E[M(A)^2] = 2 int_0^L (L - tau) exp(E(tau)) dtau`` for an interval of length ``L``.

    Near zero ``exp(E(tau)) ~ tau^{-c}`` with ``c = F(0)/q``; ``c >= d``
    means the moment is infinite and ``inf`` is returned.  The singular
    endpoint is removed by ``tau = L u^{1/(1-c)}``.
    """
    L = float(box_length)
    d = _dim(spec, d)
    ok, c = check_second_moment(spec, d)
    if cutoff == 0.0 and not ok:
        return math.inf
    if c == 0.0 and cutoff == 0.0 and not isinstance(spec, SpectralGaussian):
        return L * L
    breaks = [cutoff] if cutoff > 0 else []
    if not isinstance(spec, SpectralGaussian):
        breaks.append(covariance_support(spec))
    sing = c if (cutoff == 0.0 and c > 0) else 0.0
    p = 1.0 / (1.0 - sing)

    def integrand(u):
        if u == 0.0:
            return 0.0 if sing > 0 else L * math.exp(float(pair_exponent(spec, 0.0, cutoff)))
        tau = L * u ** p
        jac = L * p * u ** (p - 1)
        return (L - tau) * math.exp(float(pair_exponent(spec, tau, cutoff))) * jac

    pts = [(b / L) ** (1 / p) for b in breaks if 0 < b < L]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(integrand, 0.0, 1.0, points=pts or None, epsabs=tol,
                                      epsrel=1e-12, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"second moment quadrature failed: {exc}") from None
    if err > 10 * tol:
        raise QuadratureError(f"second moment quadrature error {err:.2e} above tolerance")
    return 2.0 * val
