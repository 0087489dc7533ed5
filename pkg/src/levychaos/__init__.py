"""Lévy multiplicative chaos: simulation of star scale invariant random measures
and exact checks of their exponents."""
from .kernel import (LevyTriplet, OneSidedStable, PointMass, char_exponent, laplace_exponent,
                     normalize_drift, parse_triplet, psi_prime)
from .families import Cone, Linear, MovingAverage, Power, SpectralGaussian, normalize
from .fields import Grid, sample_cone_field, sample_spectral_field
from .measure import cascade_sample, dyadic_mass_table, measure_boxes

__version__ = "0.1.0"
