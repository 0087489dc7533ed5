import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, special

from levychaos.analysis import (InsufficientScalesError, assumption2_integral,
                                check_moment_bound, check_nondegenerate, check_second_moment,
                                criteria_report, default_x_grid, pair_exponent,
                                second_moment_exact, zeta_estimate, zeta_theoretical)
from levychaos.cones import band_overlap
from levychaos.families import Cone, MovingAverage, Power, SpectralGaussian, normalize
from levychaos.kernel import LevyTriplet, OneSidedStable, PointMass

LN2 = math.log(2.0)
LOGNORMAL = normalize(Cone(LevyTriplet(0.0, 0.2)))
POINT = normalize(Cone(LevyTriplet(0.0, 0.0, (PointMass(0.5, LN2),))))


def stable_ma(norm_alpha, alpha=0.5, width=1.0):
    """Normalized stable moving average with ||f||_alpha = norm_alpha."""
    height = (norm_alpha / width) ** (1 / alpha)
    return normalize(MovingAverage(LevyTriplet(0.0, 0.0, (OneSidedStable(alpha),)), width, height))


def test_nondegenerate_examples():
    for lam2 in (0.2, 1.0, 1.9, 2.1):
        ok, margin = check_nondegenerate(normalize(Cone(LevyTriplet(0.0, lam2))))
        assert margin == pytest.approx(1 - lam2 / 2, abs=1e-14)
        assert ok == (lam2 < 2)
    ok, margin = check_nondegenerate(POINT)
    assert ok and margin == pytest.approx(1 - 0.5 * (2 * LN2 - 1), abs=1e-14)
    assert margin == pytest.approx(0.80685281944, abs=1e-10)


def test_stable_threshold():
    alpha = 0.5
    want = alpha / special.gamma(2 - alpha)
    assert check_nondegenerate(stable_ma(0.99 * want))[0]
    assert not check_nondegenerate(stable_ma(1.01 * want))[0]
    root = optimize.brentq(lambda s: check_nondegenerate(stable_ma(s))[1], 0.1, 2.0,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps)
    assert root == pytest.approx(want, abs=1e-12)


def test_stable_moving_average_drift():
    alpha, width, height = 0.4, 2.0, 0.7
    spec = normalize(MovingAverage(LevyTriplet(0.0, 0.0, (OneSidedStable(alpha),)), width, height))
    norm_a, norm_1 = width * height ** alpha, width * height
    assert spec.triplet.drift == pytest.approx(special.gamma(1 - alpha) * norm_a / (alpha * norm_1),
                                               rel=1e-14)


def test_moment_bound_examples():
    assert check_moment_bound(LOGNORMAL, 1.0) == (True, pytest.approx(0.8, abs=1e-14))
    assert check_moment_bound(POINT, 1.0) == (True, pytest.approx(0.5, abs=1e-14))
    ok, slack = check_moment_bound(normalize(Cone(LevyTriplet(0.0, 3.0))), 1.0)
    assert not ok and slack == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        check_moment_bound(LOGNORMAL, 0.0)


def test_moment_bound_small_delta_matches_margin():
    delta = 1e-6
    for spec in (LOGNORMAL, POINT):
        _, slack = check_moment_bound(spec, delta)
        _, margin = check_nondegenerate(spec)
        assert slack / delta == pytest.approx(margin, abs=1e-5)


def test_second_moment_criterion():
    assert check_second_moment(LOGNORMAL) == (True, pytest.approx(0.2, abs=1e-14))
    assert check_second_moment(POINT) == (True, pytest.approx(0.5, abs=1e-14))
    assert not check_second_moment(normalize(Cone(LevyTriplet(0.0, 1.2))))[0]
    trip = LevyTriplet(0.0, 0.3)
    lin = normalize(MovingAverage(trip, 1.0, 1.0))
    pw = normalize(MovingAverage(trip, 1.0, 1.0, rate=Power(2.0)))
    assert check_second_moment(pw)[1] == pytest.approx(check_second_moment(lin)[1] / 2)


def test_criteria_report_rows():
    rep = criteria_report(LOGNORMAL, deltas=(1.0, 0.5))
    rows = dict(rep.rows())
    assert rows["nondegenerate"] == 1
    assert rows["nondegenerate_margin"] == pytest.approx(0.9, abs=1e-14)
    assert rows["moment_bound_slack_delta_1"] == pytest.approx(0.8, abs=1e-14)
    assert rows["second_moment_exists"] == 1
    assert "margin 0.9" in rep.summary()
    spec_rep = criteria_report(normalize(SpectralGaussian(((0.3, 1.0),))))
    assert spec_rep.assumption2 is None


def test_assumption2_cone_closed_form():
    x = np.array([1e-6, 1e-3, 0.2, 0.9])
    res = assumption2_integral(LOGNORMAL, x)
    want = 0.2 * (np.log(1 / x) - 1 + x)
    np.testing.assert_allclose(res.values, want, atol=1e-8)
    assert assumption2_integral(LOGNORMAL, [1.0, 3.0]).values.tolist() == [0.0, 0.0]


def test_assumption2_slope():
    spec = normalize(Cone(LevyTriplet(0.0, 0.3), T=2.0))
    res = assumption2_integral(spec, default_x_grid())
    assert res.converged.all()
    assert res.slope == pytest.approx(0.3 * 2.0, abs=1e-6)
    assert res.residual_sup < 1e-6


def test_assumption2_power_rate_slope():
    spec = normalize(MovingAverage(LevyTriplet(0.0, 0.4), 1.5, 1.0, rate=Power(2.0)))
    res = assumption2_integral(spec, default_x_grid())
    f0 = 1.5 * 0.4
    assert res.slope == pytest.approx(f0 / 2, abs=1e-6)


def test_assumption2_fails_for_spectral():
    spec = normalize(SpectralGaussian(((0.3, 1.0),)))
    res = assumption2_integral(spec, [1e-3, 1e-2])
    assert not res.converged.any()
    with pytest.raises(ValueError):
        assumption2_integral(LOGNORMAL, [1e-3], a=0.5)


def test_zeta_theory():
    assert zeta_theoretical(LOGNORMAL, 2.0) == pytest.approx(1.8, abs=1e-14)
    assert zeta_theoretical(POINT, 2.0) == pytest.approx(1.5, abs=1e-14)
    for spec in (LOGNORMAL, POINT):
        assert zeta_theoretical(spec, 1.0) == pytest.approx(1.0, abs=1e-14)
    qs = [0.5, 1.0, 1.5, 2.0]
    np.testing.assert_allclose([zeta_theoretical(LOGNORMAL, q) for q in qs],
                               [0.525, 1.0, 1.425, 1.8], atol=1e-14)
    stable = normalize(Cone(LevyTriplet(0.0, 0.0, (OneSidedStable(0.5),))))
    assert zeta_theoretical(stable, -1.0) == -math.inf


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 1.5), st.floats(0.05, 2.0), st.floats(-1.0, 1.0))
def test_zeta_theory_is_concave(sigma2, lam, z0):
    spec = normalize(Cone(LevyTriplet(0.0, sigma2, (PointMass(lam, z0),))))
    qs = np.linspace(0.0, 3.0, 31)
    z = np.array([zeta_theoretical(spec, q) for q in qs])
    assert np.all(z[2:] - 2 * z[1:-1] + z[:-2] <= 1e-10)


def lebesgue_tables(n, jmax):
    return [[np.full(2 ** j, 2.0 ** -j) for j in range(jmax + 1)] for _ in range(n)]


def test_zeta_estimate_on_lebesgue():
    rep = zeta_estimate(lebesgue_tables(50, 6), [0.5, 2.0, 3.0], range(1, 7))
    np.testing.assert_allclose(rep.zeta_hat, [0.5, 2.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(rep.zeta_se, 0.0, atol=1e-12)
    np.testing.assert_allclose(rep.r2, 1.0)
    assert np.isnan(rep.zeta_theory).all()


def test_zeta_estimate_errors():
    with pytest.raises(ValueError):
        zeta_estimate(lebesgue_tables(10, 6), [2.0], range(1, 7))
    with pytest.raises(InsufficientScalesError):
        zeta_estimate(lebesgue_tables(50, 6), [2.0], range(1, 4))
    with pytest.raises(InsufficientScalesError):
        zeta_estimate(lebesgue_tables(50, 6), [2.0], range(1, 7), cutoff=2.0 ** -9)
    rep = zeta_estimate(lebesgue_tables(50, 6), [2.0], cutoff=2.0 ** -12)
    assert rep.levels == [1, 2, 3, 4, 5, 6]


def test_pair_exponent_cone():
    taus = np.array([1e-3, 0.2, 0.7, 1.5])
    np.testing.assert_allclose(pair_exponent(LOGNORMAL, taus),
                               0.2 * band_overlap(taus, 1e-12, 1.0), rtol=1e-10)
    np.testing.assert_allclose(pair_exponent(LOGNORMAL, taus, cutoff=0.1),
                               0.2 * band_overlap(taus, 0.1, 1.0))


def test_pair_exponent_spectral():
    spec = normalize(SpectralGaussian(((0.3, 2.0),), rate=Power(1.5)))
    tau = 0.4
    # int_tau^inf cos(lam v) / v dv = -Ci(lam tau)
    want = -0.3 * special.sici(2.0 * tau)[1] / 1.5
    assert pair_exponent(spec, tau) == pytest.approx(want, rel=1e-14)
    with pytest.raises(NotImplementedError):
        pair_exponent(spec, tau, cutoff=0.1)


def test_second_moment_lognormal_oracle():
    want, _ = integrate.quad(lambda t: 2 * (1 - t) * math.exp(0.2 * (t - 1)), 0.0, 1.0,
                             weight="alg", wvar=(-0.2, 0.0), epsabs=1e-13, epsrel=1e-13)
    assert second_moment_exact(LOGNORMAL, 1.0) == pytest.approx(want, abs=1e-8)
    assert want == pytest.approx(1.2053063444231773, abs=1e-10)


def test_second_moment_with_cutoff_oracle():
    l = 2.0 ** -12
    want, _ = integrate.quad(lambda t: 2 * (1 - t) * math.exp(0.2 * band_overlap(t, l, 1.0)),
                             0.0, 1.0, points=[l], epsabs=1e-13, epsrel=1e-13, limit=200)
    assert second_moment_exact(LOGNORMAL, 1.0, cutoff=l) == pytest.approx(want, abs=1e-9)


def test_second_moment_trivial_and_divergent():
    deterministic = normalize(Cone(LevyTriplet(0.0, 0.0)))
    assert second_moment_exact(deterministic, 0.5) == 0.25
    assert second_moment_exact(normalize(Cone(LevyTriplet(0.0, 1.2))), 1.0) == math.inf


def test_second_moment_spectral_oracle():
    spec = normalize(SpectralGaussian(((0.3, 2.0), (0.2, 5.0))))
    f = lambda t: 2 * (1 - t) * math.exp(-0.3 * special.sici(2 * t)[1] - 0.2 * special.sici(5 * t)[1])
    want, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=400)
    assert second_moment_exact(spec, 1.0) == pytest.approx(want, rel=1e-7)


def test_second_moment_scales_with_box():
    # for a cone the box at scale L sees E(tau) from ln(T / tau)
    small = second_moment_exact(LOGNORMAL, 0.25)
    want, _ = integrate.quad(lambda t: 2 * (0.25 - t) * math.exp(0.2 * (t - 1)), 0.0, 0.25,
                             weight="alg", wvar=(-0.2, 0.0), epsabs=1e-14, epsrel=1e-13)
    assert small == pytest.approx(want, rel=1e-9)
