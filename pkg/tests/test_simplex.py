"""Simplex coordinates: direction weights, radii, normalization."""

import math

import numpy as np
import pytest

from kitmon.simplex import (
    SQUARE_U_NORM,
    SimplexPoint,
    direction_weights,
    euclidean_radius,
    normalized_point_radius,
    normalized_radius,
    r_edge,
    r_max,
    radius_for_normalized,
    to_probabilities,
)


def test_square_u_traceless_and_constant_norm():
    rng = np.random.default_rng(3)
    for _ in range(100):
        theta, phi = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)
        u = direction_weights("square", theta, phi)
        assert abs(u.sum()) < 1e-12
        assert abs(np.linalg.norm(u) - SQUARE_U_NORM) < 1e-12


def test_square_center_point():
    pt = SimplexPoint("square", r=0.0, theta=0.3, phi=1.0, p_h=0.2)
    mix = to_probabilities(pt)
    assert mix.p_x == mix.p_y == mix.p_z == mix.p_I == pytest.approx(0.2)
    assert mix.p_h == 0.2


def test_square_theta_zero_formulas():
    u = direction_weights("square", 0.0, 0.7)
    k = math.sqrt(3) / 4
    assert np.allclose(u, [-k, -k, k, k])
    assert r_max("square", 0.0, 0.7) == pytest.approx((1 / 4) / k)


def test_honeycomb_euclidean_radius():
    # the direction toward (1/6, 1/6, 2/3) at distance 1/sqrt(6)
    pt = SimplexPoint("honeycomb", r=1 / math.sqrt(6), theta=-math.pi / 2)
    mix = to_probabilities(pt)
    p = np.array([mix.p_x, mix.p_y, mix.p_z])
    assert np.allclose(p, [1 / 6, 1 / 6, 2 / 3])
    assert np.linalg.norm(p - 1 / 3) == pytest.approx(1 / math.sqrt(6))
    assert normalized_point_radius(pt) == pytest.approx(1.0)


def test_r_max_boundary_probability_vanishes():
    rng = np.random.default_rng(5)
    for kind in ("honeycomb", "square"):
        for _ in range(50):
            theta = rng.uniform(-np.pi, np.pi)
            phi = rng.uniform(-np.pi, np.pi)
            p_h = rng.uniform(0, 0.5)
            rmax = r_max(kind, theta, phi, p_h=p_h)
            assert np.isfinite(rmax)
            pt = SimplexPoint(kind, r=rmax, theta=theta, phi=phi, p_h=p_h)
            mix = to_probabilities(pt)
            vec = [mix.p_x, mix.p_y, mix.p_z] + ([mix.p_I] if kind == "square" else [])
            assert min(vec) <= 1e-12
            assert abs(sum(vec) + p_h - 1.0) < 1e-9


def test_r_beyond_r_max_rejected():
    rmax = r_max("square", 0.4, -2.35)
    pt = SimplexPoint("square", r=rmax * 1.01, theta=0.4, phi=-2.35)
    with pytest.raises(ValueError, match="exceeds"):
        to_probabilities(pt)


def test_normalized_radius_examples():
    assert normalized_radius(1 / math.sqrt(6), "honeycomb", 1.0) == pytest.approx(1.0)
    # tetrahedron edge center is at Euclidean distance 1/2 from the center
    assert normalized_radius(0.5, "square", 1.0) == pytest.approx(1.0)
    assert r_edge("square", 0.5) == pytest.approx(0.25)
    assert r_edge("honeycomb", 0.5) == pytest.approx(0.5 / math.sqrt(6))
    with pytest.raises(ValueError):
        normalized_radius(0.3, "square", 0.0)


def test_euclidean_and_normalized_round_trip():
    rng = np.random.default_rng(9)
    for kind in ("honeycomb", "square"):
        for _ in range(50):
            theta = rng.uniform(-np.pi, np.pi)
            phi = rng.uniform(-np.pi, np.pi)
            p_h = rng.uniform(0, 0.4)
            p_J = rng.uniform(0, 0.4)
            share = 1 - p_h - p_J
            rmax = r_max(kind, theta, phi, p_h, p_J)
            r = rng.uniform(0, rmax)
            pt = SimplexPoint(kind, r=r, theta=theta, phi=phi, p_h=p_h, p_J=p_J)
            mix = to_probabilities(pt)
            p = np.array([mix.p_x, mix.p_y, mix.p_z] + ([mix.p_I] if kind == "square" else []))
            center = share / len(p)
            assert np.linalg.norm(p - center) == pytest.approx(euclidean_radius(pt), abs=1e-9)
            ratio = normalized_point_radius(pt)
            assert radius_for_normalized(kind, ratio, share) == pytest.approx(r, abs=1e-12)


def test_probability_validity_across_grid():
    for kind in ("honeycomb", "square"):
        for theta in np.linspace(-np.pi, np.pi, 7):
            for frac in np.linspace(0, 0.95, 8):
                rmax = r_max(kind, theta, -2.35, p_h=0.1, p_J=0.05)
                pt = SimplexPoint(kind, r=frac * rmax, theta=theta, phi=-2.35, p_h=0.1, p_J=0.05)
                mix = to_probabilities(pt)  # MeasurementMix validates on build
                mix.validate_for(kind)


def test_point_validation():
    with pytest.raises(ValueError):
        SimplexPoint("square", r=-0.1, theta=0.0)
    with pytest.raises(ValueError):
        SimplexPoint("square", r=0.1, theta=0.0, p_h=0.7, p_J=0.5)
