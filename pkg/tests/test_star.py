import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levychaos.cones import band_overlap
from levychaos.families import Cone, MovingAverage, Power, SpectralGaussian, normalize
from levychaos.fields import Grid
from levychaos.kernel import LevyTriplet, PointMass, char_exponent
from levychaos.rng import stream
from levychaos.star import (ExponentQuery, composition_residual, eta_epsilon,
                            generator_exponent_H, random_queries, remark17_check,
                            star_mc_samples, star_mc_test, star_report)

LN2 = math.log(2.0)
LOGNORMAL = normalize(Cone(LevyTriplet(0.0, 0.2)))
POINT = normalize(Cone(LevyTriplet(0.0, 0.0, (PointMass(0.5, LN2),))))
MIXED = normalize(Cone(LevyTriplet(0.0, 0.3, (PointMass(0.7, -0.4), PointMass(0.2, 1.3))), T=2.0))


def H_oracle(spec, points, weights, n=400_001):
    """Midpoint rule for int phi(sum_j q_j 1{|r - t_j| <= T/2}) dr."""
    T = spec.T
    lo, hi = min(points) - T, max(points) + T
    r = np.linspace(lo, hi, n)
    dr = r[1] - r[0]
    mid = 0.5 * (r[1:] + r[:-1])
    s = sum(q * (np.abs(mid - t) <= T / 2) for t, q in zip(points, weights))
    vals, inv = np.unique(s, return_inverse=True)
    phis = np.array([char_exponent(spec.triplet, v) for v in vals])
    return phis[inv].sum() * dr


def test_query_validation():
    with pytest.raises(ValueError):
        ExponentQuery((0.0, 1.0), (1.0,))
    with pytest.raises(ValueError):
        ExponentQuery((math.nan,), (1.0,))
    with pytest.raises(ValueError):
        ExponentQuery((0.0,), (1.0,), mode="fourier")
    assert ExponentQuery((1.0, 2.0), (1, 2)).scaled(0.5).points == (0.5, 1.0)


def test_eps_one_is_zero():
    q = ExponentQuery((0.0, 0.3), (1.0, -0.5))
    assert eta_epsilon(POINT, q, 1.0) == 0j
    with pytest.raises(ValueError):
        eta_epsilon(POINT, q, 0.0)


@pytest.mark.parametrize("spec", [LOGNORMAL, POINT, MIXED])
def test_single_point(spec):
    for q, eps in [(0.7, 0.5), (-1.9, 0.01)]:
        qy = ExponentQuery((0.4,), (q,))
        want = spec.T * char_exponent(spec.triplet, q) * math.log(1 / eps)
        assert abs(eta_epsilon(spec, qy, eps) - want) <= 1e-10 * max(1, abs(want))
        assert generator_exponent_H(spec, qy) == pytest.approx(spec.T * char_exponent(spec.triplet, q))


def test_disjoint_windows_add():
    qy = ExponentQuery((0.0, 2.5), (0.8, -1.1))
    want = 2.0 * math.log(4) * (char_exponent(MIXED.triplet, 0.8) + char_exponent(MIXED.triplet, -1.1))
    assert abs(eta_epsilon(MIXED, qy, 0.25) - want) <= 1e-10


def test_coincident_points_reduce():
    two = ExponentQuery((0.3, 0.3), (0.6, 0.9))
    one = ExponentQuery((0.3,), (1.5,))
    assert eta_epsilon(POINT, two, 0.2) == eta_epsilon(POINT, one, 0.2)


def test_zero_weights():
    qy = ExponentQuery((0.0, 0.1, 0.4), (0.0, 0.0, 0.0))
    assert generator_exponent_H(POINT, qy) == 0
    assert eta_epsilon(POINT, qy, 0.3) == 0


@pytest.mark.parametrize("points,weights", [((0.0, 0.3), (1.2, -0.7)),
                                            ((-0.4, 0.1, 0.5), (0.5, 1.0, -2.0))])
def test_H_against_midpoint_oracle(points, weights):
    got = generator_exponent_H(MIXED, ExponentQuery(points, weights))
    assert abs(got - H_oracle(MIXED, points, weights)) <= 1e-4


def test_laplace_mode_normalized():
    qy = ExponentQuery((0.2,), (1.0,), mode="laplace")
    assert abs(eta_epsilon(POINT, qy, 0.1)) <= 1e-14
    qy2 = ExponentQuery((0.0, 0.25), (1.0, 1.0), mode="laplace")
    # two points: exponent of E[e^{w(0) + w(tau)}] is psi(2) times the overlap
    assert eta_epsilon(POINT, qy2, 0.125) == pytest.approx(0.5 * band_overlap(0.25, 0.125, 1.0),
                                                           abs=1e-12)


@pytest.mark.parametrize("spec", [LOGNORMAL, POINT])
def test_composition(spec):
    qs = random_queries(stream(11, 0, 0, 5), 20)
    assert composition_residual(spec, 0.5, 0.5, qs) <= 1e-8
    assert composition_residual(spec, 0.5, 1.0, qs) == 0.0


def test_composition_other_families():
    qs = random_queries(stream(12, 0, 0, 5), 10)
    ma = normalize(MovingAverage(LevyTriplet(0.0, 0.1, (PointMass(0.3, 0.5),)), 0.7, 1.4))
    assert composition_residual(ma, 0.3, 0.6, qs) <= 1e-8
    sp = normalize(SpectralGaussian(((0.2, 1.0), (0.1, 4.0))))
    assert composition_residual(sp, 0.5, 0.5, qs) <= 1e-8
    with pytest.raises(ValueError):
        composition_residual(normalize(SpectralGaussian(((0.2, 1.0),), rate=Power(2.0))),
                             0.5, 0.5, qs)


def test_log_derivative_is_H():
    qy = ExponentQuery((0.0, 0.35), (0.9, -1.3))
    h = 1e-4
    fd = (eta_epsilon(POINT, qy, math.exp(-h)) - 0) / h
    fd2 = (eta_epsilon(POINT, qy, math.exp(-2 * h)) - eta_epsilon(POINT, qy, math.exp(-h))) / h
    deriv = 1.5 * fd - 0.5 * fd2        # one-sided second order at u = 0
    assert abs(deriv - generator_exponent_H(POINT, qy)) <= 1e-6


def test_eps_derivative_single_point():
    q = 0.8
    qy = ExponentQuery((0.1,), (q,))
    rep = remark17_check(POINT, qy, 0.3)
    assert abs(rep.lhs - (-char_exponent(POINT.triplet, q) / 0.3)) <= 1e-6
    assert rep.matches == ["inv_eps"]


def test_eps_derivative_two_points():
    rep = remark17_check(POINT, ExponentQuery((0.0, 0.3), (1.0, -0.6)), 0.5)
    assert "inv_eps" in rep.matches and "inv_eps2" not in rep.matches
    zero = remark17_check(POINT, ExponentQuery((0.0, 0.3), (0.0, 0.0)), 0.5)
    assert zero.lhs == 0
    with pytest.raises(ValueError):
        remark17_check(POINT, ExponentQuery((0.0,), (1.0,)), 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.0, 3.0))
def test_symmetric_pair_modulus(q, t):
    qy = ExponentQuery((t, -t), (q, -q))
    assert abs(np.exp(generator_exponent_H(MIXED, qy))) <= 1 + 1e-12
    assert eta_epsilon(MIXED, qy, 0.3).real <= 1e-12


def test_random_queries_modes():
    qs = random_queries(stream(1, 0, 0, 5), 5, p=3, mode="laplace")
    assert all(len(q.points) == 3 and min(q.weights) >= 0 for q in qs)


# -- Monte Carlo ------------------------------------------------------------------

GRID = Grid.uniform(0.0, 1.0, 1025)


def test_star_trivial_band():
    rep = star_mc_test(LOGNORMAL, 1.0, [(0.0, 1.0)], 300, seed=3, grid=GRID, cutoff=2.0 ** -6)
    assert rep.passed


def test_star_small_run_and_misscale():
    lhs, rhs = star_mc_samples(POINT, 0.5, [(0.0, 1.0), (0.0, 0.5)], 400, seed=4, grid=GRID,
                               cutoff=2.0 ** -6)
    assert star_report(lhs, rhs, [(0.0, 1.0), (0.0, 0.5)], 0.5).passed
    bad = star_report(lhs, rhs, [(0.0, 1.0), (0.0, 0.5)], 0.5, misscale=True)
    assert not bad.ks_passed
    rows = list(bad.rows())
    assert list(rows[0]) == ["box_lo", "box_hi", "ks_stat", "ks_p", "ratio_q05", "ratio_q10",
                             "ratio_q15", "se_q05", "se_q10", "se_q15"]


def test_star_samples_threads_and_errors():
    a = star_mc_samples(POINT, 0.5, [(0.0, 1.0)], 6, seed=4, grid=GRID, cutoff=2.0 ** -6)
    b = star_mc_samples(POINT, 0.5, [(0.0, 1.0)], 6, seed=4, grid=GRID, cutoff=2.0 ** -6,
                        threads=3)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    with pytest.raises(ValueError):
        star_mc_samples(POINT, 0.5, [(0.0, 1.0)], 2, seed=4, grid=GRID, cutoff=0.75)
    with pytest.raises(TypeError):
        star_mc_samples(SpectralGaussian(((1.0, 1.0),)), 0.5, [(0.0, 1.0)], 2, 4, GRID, 0.1)
