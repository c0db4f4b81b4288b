"""Unit tests for truncated trigonometric series and spherical diagnostics."""

import numpy as np
import pytest

from engelforge import (
    PeriodicCurve,
    convexity_margin,
    curve_integral,
    doubled_latitude_circle,
    eval_jet,
    fit_fourier,
    great_circle,
    indicatrix,
    latitude_circle,
    random_spherical_curve,
    random_surrounding_curve,
    surround_margin,
    surrounds_origin_lp,
)
from engelforge.errors import NotSpherical


def random_series(rng, modes=4, dim=3):
    decay = 1.0 / (1.0 + np.arange(modes + 1)[:, None]) ** 2
    return PeriodicCurve(
        a=rng.normal(size=(modes + 1, dim)) * decay,
        b=rng.normal(size=(modes + 1, dim)) * decay * np.r_[0.0, np.ones(modes)][:, None],
    )


def test_eval_matches_direct_trigonometric_sum():
    rng = np.random.default_rng(1)
    curve = random_series(rng)
    ts = rng.uniform(size=7)
    k = np.arange(curve.modes + 1)
    for t in ts:
        ang = 2.0 * np.pi * k * t
        direct = (np.cos(ang) @ curve.a) + (np.sin(ang) @ curve.b)
        assert np.allclose(curve.eval(t), direct, atol=1e-14)


def test_derivative_and_antiderivative_are_exact_inverses():
    rng = np.random.default_rng(2)
    raw = random_series(rng)
    # the antiderivative is defined for zero-mean series (the mean is dropped)
    curve = PeriodicCurve(a=np.vstack([np.zeros((1, 3)), raw.a[1:]]), b=raw.b)
    ts = np.linspace(0.0, 1.0, 17)
    roundtrip = curve.antiderivative().derivative()
    assert np.allclose(roundtrip.eval(ts), curve.eval(ts), atol=1e-12)
    # the antiderivative vanishes at t = 0
    assert np.allclose(curve.antiderivative().eval(0.0), 0.0, atol=1e-14)
    # derivative cross-check against central differences
    h = 1e-6
    d1 = curve.derivative().eval(ts)
    fd = (curve.eval(ts + h) - curve.eval(ts - h)) / (2 * h)
    assert np.max(np.abs(d1 - fd)) < 1e-7


def test_shift_and_rotation_act_on_coefficients():
    rng = np.random.default_rng(3)
    curve = random_series(rng)
    ts = np.linspace(0.0, 1.0, 13)
    delta = 0.37
    assert np.allclose(curve.shifted(delta).eval(ts), curve.eval(ts + delta),
                       atol=1e-12)
    mat = rng.normal(size=(3, 3))
    assert np.allclose(curve.rotated(mat).eval(ts), curve.eval(ts) @ mat.T,
                       atol=1e-12)


def test_jets_match_finite_differences():
    rng = np.random.default_rng(4)
    curve = random_series(rng, modes=3)
    t = 0.31
    jet = eval_jet(curve, t)
    h = 1e-3
    vals = {s: curve.eval(t + s * h) for s in (-2, -1, 0, 1, 2)}
    fd1 = (vals[1] - vals[-1]) / (2 * h)
    fd2 = (vals[1] - 2 * vals[0] + vals[-1]) / h**2
    fd3 = (vals[2] - 2 * vals[1] + 2 * vals[-1] - vals[-2]) / (2 * h**3)
    assert np.allclose(jet.value, vals[0], atol=1e-14)
    assert np.allclose(jet.d1, fd1, rtol=0, atol=1e-4 * max(1, np.abs(jet.d1).max()))
    assert np.allclose(jet.d2, fd2, rtol=0, atol=1e-3 * max(1, np.abs(jet.d2).max()))
    assert np.allclose(jet.d3, fd3, rtol=0, atol=1e-2 * max(1, np.abs(jet.d3).max()))


def test_reversed_latitude_is_not_convex():
    rep = convexity_margin(latitude_circle(0.4, reverse=True))
    assert rep.min_value < 0.0


def test_convexity_rejects_non_spherical_curves():
    scaled = PeriodicCurve(a=1.1 * latitude_circle(0.5).a,
                           b=1.1 * latitude_circle(0.5).b)
    with pytest.raises(NotSpherical):
        convexity_margin(scaled)


def test_convexity_sign_is_positive_gl3_invariant():
    """sign min det(g, g', g'') is invariant under g -> M g, det M > 0."""
    rng = np.random.default_rng(5)
    grid = np.arange(256) / 256
    for curve in (latitude_circle(0.6), latitude_circle(0.3, reverse=True)):
        d1 = curve.derivative()
        d2 = d1.derivative()
        pts = np.stack([curve.eval(grid), d1.eval(grid), d2.eval(grid)], axis=-1)
        base_sign = np.sign(np.min(np.linalg.det(pts)))
        for _ in range(20):
            mat = rng.normal(size=(3, 3))
            if np.linalg.det(mat) < 0:
                mat[0] = -mat[0]
            transformed = np.einsum("ij,njk->nik", mat, pts)
            assert np.sign(np.min(np.linalg.det(transformed))) == base_sign


def test_indicatrix_determinant_identity():
    """det(eta, eta', eta'') |g'|^3 = det(g', g'', g''') for eta = g'/|g'|.

    Both sides equal the turning determinant, computed here through two
    independent code paths (refit series vs direct jets).
    """
    rng = np.random.default_rng(6)
    base = random_surrounding_curve(rng)
    space = PeriodicCurve(
        a=np.vstack([np.zeros((1, 3)), base.a[1:]]), b=base.b
    ).antiderivative()
    eta, residual, turning = indicatrix(space)
    assert residual < 1e-7
    grid = np.arange(512) / 512
    e0 = eta.eval(grid)
    e1 = eta.derivative().eval(grid)
    e2 = eta.derivative().derivative().eval(grid)
    speed = np.linalg.norm(space.derivative().eval(grid), axis=1)
    lhs = np.linalg.det(np.stack([e0, e1, e2], axis=-1)) * speed**3
    rhs = turning.values[::turning.values.size // 512][:512]
    scale = np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) / scale < 1e-4


def test_surround_margin_latitude_closed_form():
    assert abs(surround_margin(latitude_circle(0.6)) + 0.6) < 1e-6
    assert abs(surround_margin(latitude_circle(0.25)) + 0.25) < 1e-6


def test_surround_margin_sign_agrees_with_lp_oracle():
    rng = np.random.default_rng(7)
    grid = np.arange(512) / 512
    for k in range(6):
        curve = random_surrounding_curve(rng)
        pts = curve.eval(grid)
        assert surround_margin(pts) > 0.0
        assert surrounds_origin_lp(pts)
    for k in range(6):
        curve = random_spherical_curve(rng)
        pts = curve.eval(grid)
        assert surround_margin(pts) < 0.0
        assert not surrounds_origin_lp(pts)


def test_curve_integral_matches_quadrature():
    rng = np.random.default_rng(8)
    curve = random_series(rng)
    grid = np.arange(4096) / 4096
    quad = curve.eval(grid).mean(axis=0)
    assert np.allclose(curve_integral(curve), quad, atol=1e-12)
    assert np.allclose(curve_integral(great_circle()), 0.0, atol=1e-14)


def test_fit_fourier_recovers_series_exactly():
    rng = np.random.default_rng(9)
    curve = random_series(rng, modes=5)
    grid = np.arange(64) / 64
    fitted, residual = fit_fourier(grid, curve.eval(grid), 5)
    assert residual < 1e-10
    assert np.allclose(fitted.a, curve.a, atol=1e-10)
    assert np.allclose(fitted.b, curve.b, atol=1e-10)


def test_doubled_latitude_traverses_twice():
    single = latitude_circle(0.5)
    double = doubled_latitude_circle(0.5)
    ts = np.linspace(0.0, 0.5, 9, endpoint=False)
    assert np.allclose(double.eval(ts), single.eval(2.0 * ts), atol=1e-12)


def test_json_roundtrip():
    rng = np.random.default_rng(10)
    curve = random_series(rng)
    back = PeriodicCurve.from_json(curve.to_json())
    assert np.array_equal(back.a, curve.a)
    assert np.array_equal(back.b, curve.b)
