"""Geometry of the truncated cones ``A_l(t)`` under ``Gamma(dt, dy) = dt y^-2 dy``.

``A_l(t) = {(s, y) : l <= y <= T, |t - s| <= y / 2}``.  All quantities are
exact; the band version ``[y_lo, y_hi]`` of each formula is what the field
simulator uses for its scale layers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ConeParams", "cone_mass", "cone_overlap", "band_overlap", "strip_intensity_mass"]


@dataclass(frozen=True)
class ConeParams:
    horizon_T: float
    cutoff_l: float

    def __post_init__(self):
        if not (0.0 < self.cutoff_l <= self.horizon_T):
            raise ValueError(
                f"need 0 < l <= T, got l={self.cutoff_l}, T={self.horizon_T}")


def cone_mass(p: ConeParams) -> float:
    return math.log(p.horizon_T / p.cutoff_l)


def band_overlap(tau, y_lo: float, y_hi: float):
    """Gamma-mass of the intersection of two cones at distance ``tau``,
    restricted to scales ``y_lo <= y <= y_hi``: ``int (y - tau)_+ y^-2 dy``.

    Vectorised over ``tau``.  At ``tau == y_lo`` the middle branch is used.
    """
    tau = np.abs(np.asarray(tau, dtype=float))
    out = np.zeros_like(tau)
    if y_hi <= y_lo:
        return out if out.ndim else float(out)
    full = tau < y_lo
    mid = (tau >= y_lo) & (tau < y_hi)
    t = tau[full]
    out[full] = math.log(y_hi / y_lo) - t / y_lo + t / y_hi
    t = tau[mid]
    out[mid] = np.log(y_hi / t) - 1.0 + t / y_hi
    return out if out.ndim else float(out)


def cone_overlap(tau, p: ConeParams):
    """``rho_l(tau) = Gamma(A_l(0) & A_l(tau))``.

    ``ln(T/l) - tau/l + tau/T`` below ``l``, ``ln(T/tau) - 1 + tau/T`` on
    ``[l, T]`` and zero beyond ``T``.
    """
    if np.any(np.asarray(tau) < 0):
        raise ValueError("tau must be >= 0")
    return band_overlap(tau, p.cutoff_l, p.horizon_T)


def strip_intensity_mass(p: ConeParams, s_lo: float, s_hi: float) -> float:
    """Gamma-mass of the rectangle ``[s_lo, s_hi] x [l, T]``."""
    if not s_lo < s_hi:
        raise ValueError("need s_lo < s_hi")
    return (s_hi - s_lo) * (1.0 / p.cutoff_l - 1.0 / p.horizon_T)
