import math

import numpy as np
import pytest

from pnsl.errors import DomainRangeError, ParameterError
from pnsl.oracles import (AnnulusInftySolution, RadialSolution, dpp_weights,
                          envelope_bruteforce, hopf_constant, infty_annulus,
                          p1_ball_radius, radial_annulus_profile, radial_ball,
                          unit_directions)
from pnsl.operators import PParams, SymMatrix, envelopes


def test_radial_ball_values():
    assert radial_ball(2, 2, 1, 0) == 0.5
    assert radial_ball(3, 3, 2, 2) == 0.0
    assert radial_ball(4, 2, 1, 0.5) == 0.375


def test_radial_ball_domain_and_parameters():
    with pytest.raises(DomainRangeError):
        radial_ball(2, 2, 1, 1.5)
    with pytest.raises(ParameterError):
        RadialSolution(p=1.0, n=2, R=1.0)


def test_radial_ode_residual_vanishes():
    # -(p-1)/p v'' - (n-1)/(p r) v' = 1 at 1000 sampled radii
    for p, n in ((1.5, 2), (2.0, 2), (3.0, 3), (7.0, 2)):
        sol = RadialSolution(p=p, n=n, R=1.3)
        rs = np.linspace(1e-6, 1.3, 1000)
        assert np.max(np.abs(sol.ode_residual(rs))) < 1e-12


def test_radial_boundary_conditions():
    sol = RadialSolution(p=2.5, n=2, R=2.0)
    assert sol.value(2.0) == 0.0
    assert sol.d1(0.0) == 0.0


def test_hopf_constant_values():
    assert hopf_constant(2, 2, 1) == 1.0
    assert hopf_constant(3, 3, 2) == 1.5


def test_hopf_constant_matches_radial_slope():
    for p, n, R in ((1.5, 2, 1.0), (4.0, 3, 2.5)):
        sol = RadialSolution(p=p, n=n, R=R)
        assert abs(abs(sol.d1(R)) - hopf_constant(p, n, R)) < 1e-14


def test_infty_annulus_values():
    # independent quadrature: -u'' = 1, u(1) = u(2) = 0 integrates to
    # u(r) = (r - 1)(2 - r)/2; at r = 1.5 that is 0.125
    a, b = 1.0, 2.0

    def by_quadrature(r):
        return 0.5 * (r - a) * (b - r)

    for r in (1.0, 1.25, 1.5, 1.75, 2.0):
        assert abs(infty_annulus(a, b, r) - by_quadrature(r)) < 1e-14
    sol = AnnulusInftySolution(a=a, b=b)
    assert sol.value(a) == 0.0
    assert abs(abs(sol.d1(a)) - 0.5) < 1e-14
    assert abs(abs(sol.d1(b)) - 0.5) < 1e-14


def test_infty_annulus_p_function_exact():
    sol = AnnulusInftySolution(a=1.0, b=2.0)
    rs = np.linspace(1.0, 2.0, 10001)
    p = sol.p_function(rs)
    assert p.max() - p.min() < 1e-15
    assert abs(p[0] - 0.25) < 1e-15


def test_infty_annulus_domain_error():
    with pytest.raises(DomainRangeError):
        infty_annulus(1.0, 2.0, 0.5)


def test_p1_ball_radius():
    assert p1_ball_radius(2, -0.5) == 0.5
    assert p1_ball_radius(3, -1.0) == 2.0
    with pytest.raises(ParameterError):
        p1_ball_radius(2, 0.5)


def test_p1_radius_is_hopf_limit():
    # solve R p/(p+n-2) = -c for R and let p -> 1
    n, c = 3, -0.7
    for p in (1.01, 1.001, 1.0001):
        R = -c * (p + n - 2) / p
        assert abs(R - p1_ball_radius(n, c)) < 10 * (p - 1)


def test_dpp_weights_values():
    w = dpp_weights(2, 2)
    assert (w.alpha, w.beta, w.source_coeff) == (0.0, 1.0, 0.5)
    w = dpp_weights(4, 2)
    assert (w.alpha, w.beta, w.source_coeff) == (0.5, 0.5, 0.5)


def test_dpp_weights_invariants():
    for p in (1.2, 1.9, 2.0, 3.7, 9.0):
        for n in (2, 3):
            w = dpp_weights(p, n)
            assert abs(w.alpha + w.beta - 1.0) < 1e-15
            assert w.beta > 0
            assert (w.alpha >= 0) == (p >= 2)


def test_dpp_mean_value_exactness_on_radial_oracle():
    # S_eps applied to the radial solution with f = 1 returns the field,
    # up to terms measured well below eps^3 (analytic circle sampling;
    # the radial solution is quadratic, so the defect is pure rounding)
    for p in (2.0, 3.0):
        w = dpp_weights(p, 2)
        sol = RadialSolution(p=p, n=2, R=1.0)
        th = 2 * np.pi * np.arange(64) / 64
        for eps in (0.1, 0.05, 0.025):
            for x0, y0 in ((0.0, 0.0), (0.3, 0.1), (-0.5, 0.4)):
                xs = x0 + eps * np.cos(th)
                ys = y0 + eps * np.sin(th)
                vals = sol.as_xy()(xs, ys)
                s_eps = (w.beta * vals.mean()
                         + 0.5 * w.alpha * (vals.max() + vals.min())
                         + w.source_coeff * eps**2)
                defect = abs(s_eps - sol.as_xy()(np.array(x0), np.array(y0)))
                assert defect < 1e-3 * eps**3


def test_envelope_bruteforce_examples():
    x = SymMatrix([[1, 0], [0, -1]])
    lo, hi = envelope_bruteforce(4.0, x, 720)
    assert abs(lo - (-1.5)) < 1e-5
    assert abs(hi - (-0.5)) < 1e-5
    # isotropic X: direction-independent
    gam = 0.7
    lo, hi = envelope_bruteforce(3.0, SymMatrix([[gam, 0], [0, gam]]), 128)
    expected = -gam * (3 - 1) / 3 - gam * (2 - 1) / 3 - 1
    assert abs(lo - expected) < 1e-12 and abs(hi - expected) < 1e-12
    # p = 2 kills the anisotropic term
    lo, hi = envelope_bruteforce(2.0, SymMatrix([[0.4, 0.3], [0.3, -1.0]]), 128)
    assert abs(lo - hi) < 1e-12
    assert abs(lo - (-0.5 * (0.4 - 1.0) - 1.0)) < 1e-12


def test_envelope_bruteforce_quadratic_convergence(rng):
    # miss decays like 1/m^2 in the direction count
    m_list = (64, 128, 256, 512)
    errs = []
    x = SymMatrix([[0.9, 0.5], [0.5, -0.8]])  # eigenvectors off-axis
    lo_cf, hi_cf = envelopes(PParams(p=4.0), x)
    for m in m_list:
        lo, hi = envelope_bruteforce(4.0, x, m)
        errs.append(max(abs(lo - lo_cf), abs(hi - hi_cf)))
    # fit log-log slope
    slope = np.polyfit(np.log(m_list), np.log(np.maximum(errs, 1e-300)), 1)[0]
    assert slope < -1.6


def test_envelope_bruteforce_validation():
    with pytest.raises(ParameterError):
        envelope_bruteforce(3.0, SymMatrix([[1, 0], [0, 1]]), 32)


def test_unit_directions_spread():
    d2 = unit_directions(16, 2)
    assert np.allclose(np.hypot(d2[:, 0], d2[:, 1]), 1.0)
    d3 = unit_directions(100, 3)
    assert np.allclose(np.linalg.norm(d3, axis=1), 1.0, atol=1e-12)


def test_radial_annulus_profile_matches_closed_form_p2():
    # closed form for p = 2, n = 2: u = -r^2/2 + A ln r + B with
    # u(1) = u(2) = 0 gives B = 1/2, A = 1.5/ln 2
    u, du = radial_annulus_profile(2.0, 2, 1.0, 2.0)
    A = 1.5 / math.log(2.0)
    rs = np.linspace(1.0, 2.0, 41)
    exact = -rs**2 / 2 + A * np.log(rs) + 0.5
    assert np.max(np.abs(u(rs) - exact)) < 1e-9
    assert abs(du(1.0) - (-1.0 + A)) < 1e-8
    assert abs(du(2.0) - (-2.0 + A / 2)) < 1e-8


def test_radial_annulus_profile_boundary_values():
    for p in (1.5, 3.0):
        u, du = radial_annulus_profile(p, 2, 1.0, 2.0)
        assert abs(u(1.0)) < 1e-12
        assert abs(u(2.0)) < 1e-9
        assert u(1.5) > 0
