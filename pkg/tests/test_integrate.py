from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from strategies import valid_params

from replidyn.dynamics import conserved_quantity, stationary_points, vector_field
from replidyn.game_model import ECOMMERCE, RETAIL, PopulationState
from replidyn.integrate import (
    IntegratorOptions,
    Method,
    TerminationKind,
    detect_convergence,
    detect_orbit_closure,
    integrate,
    integrate_field,
    step_rk4,
)

TIGHT = IntegratorOptions(abs_tol=1e-10, rel_tol=1e-10)


def scipy_orbit(params, start, t_end, **kw):
    """Reference solution from scipy's DOP853 at tight tolerances."""
    rhs = lambda t, s: vector_field(params, (s[0], s[1]))
    return solve_ivp(rhs, (0.0, t_end), list(start), method="DOP853", rtol=1e-12, atol=1e-13, **kw)


def scipy_period(params, start):
    """First return time to the section y = y0 crossed in the same direction."""
    y0 = start[1]
    sign = np.sign(vector_field(params, start)[1])

    def section(t, s):
        return s[1] - y0 if t > 1e-6 else sign

    section.direction = sign
    sol = scipy_orbit(params, start, 20.0, events=section)
    return sol.t_events[0][0]


def test_options_validation():
    with pytest.raises(ValueError):
        IntegratorOptions(abs_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorOptions(step=-1.0)
    with pytest.raises(ValueError):
        IntegratorOptions(boundary_clamp=0.1)
    assert IntegratorOptions(method="FixedRK4").method is Method.FixedRK4


def test_step_rk4_matches_textbook_formula():
    h = 0.05
    f = lambda s: np.array(vector_field(RETAIL, s))
    s0 = np.array([0.4, 0.3])
    k1 = f(s0)
    k2 = f(s0 + h / 2 * k1)
    k3 = f(s0 + h / 2 * k2)
    k4 = f(s0 + h * k3)
    expected = s0 + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    got = step_rk4(RETAIL, PopulationState(0.4, 0.3), h)
    assert (got.x, got.y) == pytest.approx(tuple(expected), abs=1e-15)


def test_retail_orbit_closes_with_scipy_period():
    traj = integrate(RETAIL, (0.4, 0.3), TIGHT)
    assert traj.termination.kind is TerminationKind.OrbitClosed
    assert traj.termination.period == pytest.approx(scipy_period(RETAIL, (0.4, 0.3)), abs=1e-7)
    # the start is off the section: the record runs from t=0 to the second crossing
    (t1, x1), (t2, x2) = traj.crossings
    assert t2 - t1 == pytest.approx(traj.termination.period, abs=1e-12)
    assert traj.t[-1] == t2
    assert x2 == pytest.approx(x1, abs=1e-6)
    assert traj.y[-1] == pytest.approx(0.4, abs=1e-12)


def test_adaptive_solution_matches_scipy():
    traj = integrate(RETAIL, (0.4, 0.3), TIGHT.with_(t_max=5.0, stop_on_closure=False))
    ref = scipy_orbit(RETAIL, (0.4, 0.3), 5.0, t_eval=traj.t)
    assert np.max(np.abs(ref.y[0] - traj.x)) < 1e-8
    assert np.max(np.abs(ref.y[1] - traj.y)) < 1e-8


def test_small_orbit_period_close_to_linearisation():
    omega = math.sqrt(20 / 81 * 0.24 * 180)
    traj = integrate(RETAIL, (10 / 18 + 1e-3, 0.4), TIGHT)
    assert traj.termination.kind is TerminationKind.OrbitClosed
    assert traj.termination.period == pytest.approx(2 * math.pi / omega, rel=0.05)


def test_h_conserved_over_ten_periods():
    opts = TIGHT.with_(t_max=10 * 2.0113, stop_on_closure=False)
    traj = integrate(RETAIL, (0.4, 0.3), opts)
    h0 = conserved_quantity(RETAIL, (0.4, 0.3))
    drift = max(abs(conserved_quantity(RETAIL, s) - h0) for s in traj.states)
    assert drift <= 1e-6


def test_samples_are_dense():
    traj = integrate(RETAIL, (0.4, 0.3), TIGHT.with_(t_max=5.0, stop_on_closure=False))
    gaps = np.max(np.abs(np.diff(traj.states, axis=0)), axis=1)
    assert gaps.max() <= 0.01 + 1e-12
    assert np.all(np.diff(traj.t) > 0)


def test_rk4_is_fourth_order():
    period = scipy_period(RETAIL, (0.4, 0.3))

    def final(h):
        opts = IntegratorOptions(method=Method.FixedRK4, step=h, t_max=period, stop_on_closure=False)
        traj = integrate(RETAIL, (0.4, 0.3), opts)
        assert traj.t[-1] == pytest.approx(period)
        return traj.states[-1]

    h = period / 40
    reference = final(h / 10)
    err_h = np.max(np.abs(final(h) - reference))
    err_half = np.max(np.abs(final(h / 2) - reference))
    assert err_h / err_half >= 12


def test_ecommerce_sinks_reached():
    up = integrate(ECOMMERCE, (0.35, 0.60))
    down = integrate(ECOMMERCE, (0.65, 0.15))
    assert str(up.termination) == "ConvergedTo(1,1)"
    assert str(down.termination) == "ConvergedTo(0,0)"
    assert max(abs(up.x[-1] - 1), abs(up.y[-1] - 1)) <= 1e-6
    assert max(abs(down.x[-1]), abs(down.y[-1])) <= 1e-6


def test_convergence_rate_between_corner_eigenvalues():
    traj = integrate(ECOMMERCE, (0.35, 0.60))
    dist = np.hypot(1 - traj.x, 1 - traj.y)
    mask = (dist < 1e-3) & (dist > 1e-8)
    slope = np.polyfit(traj.t[mask], np.log(dist[mask]), 1)[0]
    assert -12 * 1.1 <= slope <= -6 * 0.9


def test_detect_convergence_needs_slow_field_and_proximity():
    sinks = [p for p in stationary_points(ECOMMERCE) if p.stability.value == "Sink"]
    opts = IntegratorOptions()
    assert detect_convergence(ECOMMERCE, (1.0, 1.0), sinks, opts).label == "(1,1)"
    assert detect_convergence(ECOMMERCE, (1 - 1e-10, 1 - 1e-10), sinks, opts).label == "(1,1)"
    assert detect_convergence(ECOMMERCE, (1 - 1e-7, 1 - 1e-7), sinks, opts) is None
    assert detect_convergence(ECOMMERCE, (0.5, 0.5), sinks, opts) is None


def test_detect_orbit_closure_on_external_samples():
    sol = scipy_orbit(RETAIL, (0.4, 0.3), 3.0, t_eval=np.linspace(0, 3.0, 601))
    period = detect_orbit_closure((sol.t, sol.y[0], sol.y[1]), RETAIL, 1e-5)
    assert period == pytest.approx(scipy_period(RETAIL, (0.4, 0.3)), abs=1e-6)
    assert detect_orbit_closure((sol.t[:100], sol.y[0][:100], sol.y[1][:100]), RETAIL, 1e-5) is None
    # no interior centre: no section to close on
    assert detect_orbit_closure((sol.t, sol.y[0], sol.y[1]), ECOMMERCE.with_markups(1.0, -3.0), 1e-5) is None


def test_start_at_sink_terminates_immediately():
    traj = integrate(ECOMMERCE, (0.0, 0.0))
    assert traj.termination.kind is TerminationKind.ConvergedTo
    assert len(traj) == 1


def test_edges_are_invariant():
    traj = integrate(ECOMMERCE, (0.0, 0.7), IntegratorOptions(t_max=20))
    assert np.all(traj.x == 0.0)
    assert traj.y[-1] < 1e-6


def test_determinism():
    for method in Method:
        opts = IntegratorOptions(method=method, t_max=8.0, stop_on_closure=False)
        a = integrate(RETAIL, (0.2, 0.7), opts)
        b = integrate(RETAIL, (0.2, 0.7), opts)
        assert a.t.tobytes() == b.t.tobytes()
        assert a.x.tobytes() == b.x.tobytes()
        assert a.y.tobytes() == b.y.tobytes()
        assert (a.accepted, a.rejected) == (b.accepted, b.rejected)


def test_non_finite_field_is_a_step_failure():
    def bad(x, y):
        return (math.nan, 0.0) if x > 0.5 else (1.0, 0.0)

    traj = integrate_field(bad, 0.4, 0.5, IntegratorOptions(t_max=1.0))
    assert traj.termination.kind is TerminationKind.StepFailure


corner_or_edge = st.sampled_from([0.0, 1.0]) | st.floats(0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(valid_params(), corner_or_edge, corner_or_edge, st.sampled_from(list(Method)))
def test_forward_invariance(params, x0, y0, method):
    opts = IntegratorOptions(method=method, t_max=5.0, step=0.01 if method is Method.FixedRK4 else None)
    traj = integrate(params, (x0, y0), opts)
    assert traj.termination.kind is not TerminationKind.StepFailure
    assert np.all((traj.x >= 0) & (traj.x <= 1) & (traj.y >= 0) & (traj.y <= 1))
    # faces are invariant: a zero coordinate stays zero
    for start, series in ((x0, traj.x), (y0, traj.y)):
        if start in (0.0, 1.0):
            assert np.all(series == start)
