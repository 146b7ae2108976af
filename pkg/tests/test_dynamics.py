from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import interior_states, valid_params

from replidyn.dynamics import (
    BoundaryState,
    DegenerateInterior,
    NoInteriorPoint,
    PointKind,
    Stability,
    classify_eigenvalues,
    conserved_quantity,
    conserved_quantity_coefficients,
    interior_eigenvalues,
    interior_location,
    jacobian,
    jacobian_bound,
    reduced_coefficients,
    stationary_points,
    vector_field,
)
from replidyn.game_model import ECOMMERCE, RETAIL, GameParams, Regime, classify_regime

# hand-derived: sqrt(x*(1-x*) y*(1-y*) |a c|) with a = 10
RETAIL_OMEGA = math.sqrt(20 / 81 * 0.24 * 180)
ECOMMERCE_LAMBDA = math.sqrt(120 / 484 * 0.24 * 220)


def _by_kind(params):
    return {p.kind: p for p in stationary_points(params)}


def test_reduced_coefficients_reference():
    assert reduced_coefficients(RETAIL).__dict__ == {"a": 10.0, "b": -4.0, "c": -18.0, "d": 10.0}
    assert reduced_coefficients(ECOMMERCE).__dict__ == {"a": 10.0, "b": -4.0, "c": 22.0, "d": -10.0}


def test_retail_stationary_points():
    pts = _by_kind(RETAIL)
    centre = pts[PointKind.Interior]
    assert centre.x == pytest.approx(10 / 18, abs=1e-12)
    assert centre.y == pytest.approx(0.4, abs=1e-12)
    assert centre.stability is Stability.Center
    l1, l2 = centre.eigenvalues
    assert l1.real == 0.0 and l2.real == 0.0
    assert abs(l1.imag) == pytest.approx(RETAIL_OMEGA, abs=1e-12)
    assert l1 == l2.conjugate()
    for kind in (PointKind.Corner00, PointKind.Corner01, PointKind.Corner10, PointKind.Corner11):
        assert pts[kind].stability is Stability.Saddle


def test_ecommerce_stationary_points():
    pts = _by_kind(ECOMMERCE)
    saddle = pts[PointKind.Interior]
    assert (saddle.x, saddle.y) == pytest.approx((10 / 22, 0.4), abs=1e-12)
    assert saddle.stability is Stability.Saddle
    assert sorted(e.real for e in saddle.eigenvalues) == pytest.approx(
        [-ECOMMERCE_LAMBDA, ECOMMERCE_LAMBDA], abs=1e-12
    )
    expected = {
        PointKind.Corner00: ((-4, -10), Stability.Sink),
        PointKind.Corner11: ((-6, -12), Stability.Sink),
        PointKind.Corner01: ((6, 10), Stability.Source),
        PointKind.Corner10: ((4, 12), Stability.Source),
    }
    for kind, (evs, stability) in expected.items():
        assert pts[kind].eigenvalues == tuple(complex(v) for v in evs)
        assert pts[kind].stability is stability


def test_interior_eigenvalues_agree_with_numpy():
    for params in (RETAIL, ECOMMERCE):
        xs, ys = interior_location(params)
        ours = sorted(interior_eigenvalues(params), key=lambda z: (z.real, z.imag))
        ref = sorted(np.linalg.eigvals(jacobian(params, (xs, ys))), key=lambda z: (z.real, z.imag))
        assert np.allclose(ours, ref, atol=1e-12)


def test_interior_outside_square_is_omitted():
    # valid parameters always keep the interior point inside; |mu| > |psi| can push it out
    params = GameParams(8, 5, 2, 1, 1.0, -3.0)
    xs, _ = interior_location(params)
    assert not 0 < xs < 1
    assert len(stationary_points(params)) == 4
    with pytest.raises(NoInteriorPoint):
        interior_eigenvalues(params)


def test_degenerate_interior():
    with pytest.raises(DegenerateInterior):
        interior_location(GameParams(8, 5, 2, 1, 1.0, -2.0))


def test_classify_eigenvalues_table():
    assert classify_eigenvalues((-1 + 0j, -2 + 0j)) is Stability.Sink
    assert classify_eigenvalues((1 + 0j, 2 + 0j)) is Stability.Source
    assert classify_eigenvalues((1 + 0j, -2 + 0j)) is Stability.Saddle
    assert classify_eigenvalues((3j, -3j)) is Stability.Center
    assert classify_eigenvalues((1e-14 + 3j, 1e-14 - 3j)) is Stability.Center
    assert classify_eigenvalues((0j, -1 + 0j)) is Stability.NonHyperbolicOther
    assert classify_eigenvalues((-1 + 2j, -1 - 2j)) is Stability.Sink


def test_retail_h_reference_value():
    # independent evaluation of d ln x - (c + d) ln(1-x) - b ln y + (a + b) ln(1-y)
    a, b, c, d = 10.0, -4.0, -18.0, 10.0
    x, y = 0.4, 0.3
    oracle = d * math.log(x) - (c + d) * math.log(1 - x) - b * math.log(y) + (a + b) * math.log(1 - y)
    assert conserved_quantity(RETAIL, (x, y)) == pytest.approx(oracle, rel=1e-14)
    assert conserved_quantity(RETAIL, (x, y)) == pytest.approx(-20.205453189805617, rel=1e-13)


def test_h_rejects_boundary():
    with pytest.raises(BoundaryState):
        conserved_quantity(RETAIL, (0.0, 0.5))


def test_h_gradient_vanishes_at_interior_point():
    h = conserved_quantity_coefficients(RETAIL)
    gx, gy = h.gradient(*interior_location(RETAIL))
    assert abs(gx) < 1e-12 and abs(gy) < 1e-12


@settings(max_examples=200, deadline=None)
@given(valid_params(), st.lists(interior_states(), min_size=5, max_size=5))
def test_jacobian_matches_finite_differences(params, states):
    f = lambda x, y: np.array(vector_field(params, (x, y)))
    h = 1e-6
    for x, y in states:
        fd = np.column_stack([
            (f(x + h, y) - f(x - h, y)) / (2 * h),
            (f(x, y + h) - f(x, y - h)) / (2 * h),
        ])
        assert np.max(np.abs(jacobian(params, (x, y)) - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


@settings(max_examples=300)
@given(valid_params())
def test_corner_eigenvalues_equal_closed_forms(params):
    u1, u2, u3, u4 = params.utilities
    psi, mu = params.psi, params.mu
    closed = {
        (0, 0): (u4 - u2, -psi),
        (1, 1): (u3 - u1, -psi - mu),
        (0, 1): (u1 - u3, psi),
        (1, 0): (u2 - u4, psi + mu),
    }
    for (x, y), (l1, l2) in closed.items():
        j = jacobian(params, (float(x), float(y)))
        assert j[0, 0] == l1 and j[1, 1] == l2
        assert j[0, 1] == 0.0 and j[1, 0] == 0.0
    for p in stationary_points(params):
        if p.kind is not PointKind.Interior:
            l1, l2 = closed[(int(p.x), int(p.y))]
            assert p.eigenvalues == (complex(l1), complex(l2))


@settings(max_examples=300)
@given(valid_params())
def test_regime_stability_table(params):
    regime = classify_regime(params)
    pts = _by_kind(params)
    if regime is Regime.OscillatoryProp1:
        assert all(pts[k].stability is Stability.Saddle for k in pts if k is not PointKind.Interior)
        if PointKind.Interior in pts:
            assert pts[PointKind.Interior].stability is Stability.Center
    elif regime is Regime.BistableProp2:
        assert pts[PointKind.Corner00].stability is Stability.Sink
        assert pts[PointKind.Corner11].stability is Stability.Sink
        assert pts[PointKind.Corner01].stability is Stability.Source
        assert pts[PointKind.Corner10].stability is Stability.Source
        if PointKind.Interior in pts:
            assert pts[PointKind.Interior].stability is Stability.Saddle


@settings(max_examples=200)
@given(valid_params(), st.lists(interior_states(), min_size=5, max_size=5))
def test_h_is_conserved_along_the_field(params, states):
    h = conserved_quantity_coefficients(params)
    for x, y in states:
        gx, gy = h.gradient(x, y)
        fx, fy = vector_field(params, (x, y))
        assert abs(gx * fx + gy * fy) <= 1e-10


@settings(max_examples=200)
@given(valid_params())
def test_field_vanishes_at_stationary_points(params):
    for p in stationary_points(params):
        fx, fy = vector_field(params, p.location)
        if p.kind is PointKind.Interior:
            assert abs(fx) < 1e-12 * max(1.0, params.u1 - params.u4)
            assert abs(fy) < 1e-12 * max(1.0, abs(params.psi))
        else:
            assert fx == 0.0 and fy == 0.0


@given(valid_params(), interior_states(0.0))
def test_jacobian_bound_dominates_norm(params, state):
    norm = np.max(np.sum(np.abs(jacobian(params, state)), axis=1))
    assert jacobian_bound(params)(*state) == pytest.approx(norm, rel=1e-12, abs=1e-300)
