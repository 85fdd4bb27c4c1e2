import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from homgrad import (BoundError, Composite, IntegratorConfig, ParameterSignal, PECertificate,
                     PESettings, ScenarioConfig, Single, Tracker, certify, classify, integrate,
                     orthogonality_ball_radius, orthogonality_dwell, piecewise_x, piecewise_z,
                     projection_step, regressor_power_integral, scalar_V_closed_form,
                     theorem1_bound, theorem2_escape_bound, theorem3_fixed_time_bound,
                     tracker_gain_check, vector)

EXACT = PECertificate(T=math.pi / 2, epsilon=4 / math.pi, u_M=2.0)
UNIT = PECertificate(T=1.0, epsilon=1.0, u_M=1.0)


def test_theorem1_reference_value():
    r = theorem1_bound(5.0, 0.75, EXACT)
    assert r.k == 3 and r.bound == pytest.approx(3 * math.pi / 2)
    # k is the smallest integer with k T eps^(p+1) >= |x0|^(1-p) / (1-p)
    need = 5.0 ** 0.25 / 0.25
    assert 3 * EXACT.T * EXACT.epsilon ** 1.75 >= need > 2 * EXACT.T * EXACT.epsilon ** 1.75


def test_theorem1_conservative_certificate(scalar_cert):
    r = theorem1_bound(5.0, 0.75, scalar_cert)
    assert r.k == 3 and r.bound == pytest.approx(4.712, abs=1e-3)


def test_theorem1_degenerate_and_unit_cases():
    assert theorem1_bound(0.0, 0.5, EXACT).k == 0
    assert theorem1_bound(1e-300, 0.5, EXACT).k == 1
    r = theorem1_bound(1.0, 0.0, UNIT)
    assert r.k == 1 and r.bound == 1.0


def test_theorem1_errors():
    with pytest.raises(BoundError):
        theorem1_bound(1.0, 1.0, EXACT)
    with pytest.raises(BoundError, match="not PE"):
        theorem1_bound(1.0, 0.5, PECertificate(T=1.0, epsilon=0.0, u_M=1.0))


def test_theorem2_values():
    r = theorem2_escape_bound(1.0, 1.5, EXACT)
    k = math.ceil(1 / (2 ** 0.25 * 0.5 * (math.pi / 2) * (4 / math.pi) ** 2.5))
    assert r.k == k == 1
    assert theorem2_escape_bound(math.inf, 1.5, EXACT).k == 1
    assert theorem2_escape_bound(1.0, 3.0, UNIT).k == 1
    assert theorem2_escape_bound(1e-6, 1.5, EXACT).k > 1
    with pytest.raises(BoundError):
        theorem2_escape_bound(1.0, 0.5, EXACT)


def test_theorem3_values():
    r = theorem3_fixed_time_bound([0.75, 1.5], EXACT)
    k1 = math.ceil(1 / (0.25 * EXACT.T * EXACT.epsilon ** 1.75))
    k2 = math.ceil(1 / (2 ** 0.25 * 0.5 * EXACT.T * EXACT.epsilon ** 2.5))
    assert r.k_parts == (k1, k2) and r.bound == pytest.approx((k1 + k2) * EXACT.T)
    r = theorem3_fixed_time_bound([0.5, 2.0], UNIT)
    assert r.k_parts == (2, 1) and r.bound == 3.0
    with pytest.raises(BoundError, match="not a fixed-time configuration"):
        theorem3_fixed_time_bound([0.9], UNIT)
    with pytest.raises(BoundError, match="not a fixed-time configuration"):
        theorem3_fixed_time_bound([1.0, 1.5], UNIT)


def test_theorem3_exponent_selection():
    # eps = 1: (1 - q) is largest for the smallest q, (q - 1) for the largest
    r = theorem3_fixed_time_bound([0.2, 0.6, 1.0, 1.4, 3.0], UNIT)
    assert r.inputs["p_low"] == 0.2 and r.inputs["p_high"] == 3.0
    # exact ties are rare in floating point, so exercise the tie-break directly
    from homgrad.analysis import _argmax
    assert _argmax((0.25, 0.5, 0.75), lambda q: 1.0) == 0.25
    assert _argmax((0.25, 0.5, 0.75), lambda q: min(q, 0.5)) == 0.5


def test_closed_form_trivial_cases():
    assert scalar_V_closed_form(12.5, 0.75, 0.0) == 12.5
    assert scalar_V_closed_form(0.0, 2.0, 3.0) == 0.0
    with pytest.raises(ValueError):
        scalar_V_closed_form(1.0, 1.0, 1.0)


@pytest.mark.parametrize("p", [0.5, 0.75, 2.0])
def test_closed_form_matches_adaptive_ode_solver(p, scalar_signal):
    def f(t, x):
        u = 2 * math.cos(2 * t)
        e = u * x[0]
        return [-abs(e) ** p * math.copysign(1.0, e) * u]

    for t1 in (0.3, 0.8, 1.0):
        ref = solve_ivp(f, (0, t1), [-5.0], rtol=1e-12, atol=1e-14).y[0, -1]
        I = regressor_power_integral(scalar_signal, 0.0, t1, p)
        assert scalar_V_closed_form(12.5, p, I) == pytest.approx(0.5 * ref ** 2, rel=1e-7)


def test_piecewise_z_examples():
    assert piecewise_z(0.0, [1.0], 0.5, 3.0) == 0.0
    assert piecewise_z(1.0, [1.0], 0.5, 2.0) == 0.0
    assert piecewise_z(1.0, [1.0], 2.0, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        piecewise_z(1.0, [1.0], 1.0, 1.0)


def test_piecewise_x_examples():
    assert piecewise_x([1.0, 1.0], [1.0, 0.0], 0.5, 100.0) == pytest.approx([0.0, 1.0])
    x = np.array([0.0, 2.0])
    assert np.array_equal(piecewise_x(x, [1.0, 0.0], 0.5, 0.3), x)


@pytest.mark.parametrize("p", [0.5, 2.0])
def test_piecewise_x_matches_ode_solver(p):
    rng = np.random.default_rng(7)
    for _ in range(5):
        x1 = rng.standard_normal(3)
        mu = rng.standard_normal(3)
        dwell = 0.3 * orthogonality_dwell(x1, mu, 0.5)

        def f(t, x):
            e = mu @ x
            return -abs(e) ** p * np.sign(e) * mu

        ref = solve_ivp(f, (0, dwell), x1, rtol=1e-12, atol=1e-14).y[:, -1]
        assert piecewise_x(x1, mu, p, dwell) == pytest.approx(ref, rel=1e-8, abs=1e-12)


def test_projection_examples():
    assert projection_step([3.0, 4.0], [1.0, 0.0]) == pytest.approx([0.0, 4.0])
    assert np.array_equal(projection_step([0.0, 4.0], [1.0, 0.0]), [0.0, 4.0])
    with pytest.raises(ValueError):
        projection_step([1.0, 2.0], [0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_projection_is_idempotent(x, mu):
    mu = np.asarray(mu)
    if np.linalg.norm(mu) < 1e-3:
        return
    once = projection_step(x, mu)
    assert projection_step(once, mu) == pytest.approx(once, abs=1e-9 * (1 + np.linalg.norm(x)))
    assert abs(mu @ once) <= 1e-9 * np.linalg.norm(mu) * (1 + np.linalg.norm(x))


def test_projection_over_orthogonal_set_is_zero_map():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    basis = q * rng.uniform(0.5, 3.0, 4)
    for _ in range(100):
        x = rng.standard_normal(4) * 10
        y = x
        for v in basis.T:
            y = projection_step(y, v)
        assert np.linalg.norm(y) <= 1e-12 * np.linalg.norm(x)


def test_orthogonality_dwell_is_exact_hit_time():
    x, mu = np.array([0.3, -0.2]), np.array([1.0, 1.0])
    tau = orthogonality_dwell(x, mu, 0.5)
    assert piecewise_z(mu @ x, mu, 0.5, tau) == 0.0
    assert piecewise_z(mu @ x, mu, 0.5, 0.99 * tau) != 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.floats(0.1, 0.9), st.floats(0.1, 5.0))
def test_ball_condition_implies_orthogonalisation(direction, mu, p, dwell):
    mu = np.asarray(mu)
    d = np.asarray(direction)
    u_min = np.linalg.norm(mu)
    if u_min < 1e-2 or np.linalg.norm(d) < 1e-6:
        return
    x = d / np.linalg.norm(d) * orthogonality_ball_radius(u_min, p, dwell)
    assert orthogonality_dwell(x, mu, p) <= dwell * (1 + 1e-9)


def test_classification_table(scalar_cert):
    assert classify(Single(0.75), 1, scalar_cert).label == "finite_time"
    assert classify(Single(1.0), 1, scalar_cert).label == "exponential"
    assert classify(Single(1.5), 1, scalar_cert).label == "asymptotic"
    assert classify(Composite([0.75, 1.5]), 1, scalar_cert).label == "fixed_time"
    assert classify(Composite([0.75, 1.5]), 3, scalar_cert).label == "asymptotic"
    assert classify(Composite([0.2, 1.9]), 3, scalar_cert).label == "no_guarantee"
    assert classify(Single(0.0), 3, scalar_cert).label == "no_guarantee"
    assert classify(Tracker(3.3), 1, scalar_cert).label == "finite_time"


def test_tracker_gain_check():
    assert tracker_gain_check(3.3, 3.0)
    assert not tracker_gain_check(1.0, 1.0)
    assert not tracker_gain_check(0.5, 3.0)


def test_finite_time_bound_holds_on_random_scenarios():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        amp, freq, bias = rng.uniform(1, 3), rng.uniform(1, 4), rng.uniform(0, 0.5)
        p = rng.uniform(0.55, 0.95)
        theta, theta_hat0 = rng.uniform(-5, 5), rng.uniform(-5, 5)
        T = 2 * math.pi / freq
        u = vector([(amp, freq), bias])
        cert = certify(u, T, 2 * T, 16, T / 16)
        bound = theorem1_bound(abs(theta_hat0 - theta), p, cert)
        scen = ScenarioConfig("rand", u, ParameterSignal(constant=np.array([theta])),
                              (("p", Single(p)),), (theta_hat0,), bound.bound + T,
                              IntegratorConfig(step=1e-4, record_stride=10),
                              PESettings(T=T))
        tr = integrate(scen, Single(p), scen.integrator)
        assert tr.converged_at is not None and tr.converged_at <= bound.bound, (p, amp, freq)
