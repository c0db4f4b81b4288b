"""Unit tests for fibrewise primitives, families, patching, and plane fields."""

import numpy as np
import pytest

from engelforge import (
    PeriodicCurve,
    Transition,
    WIGGLE_BUDGET,
    base_independent_family,
    derived_prolongation,
    ensure_embedded,
    family_values,
    fibrewise_integrate,
    great_circle,
    indicatrix,
    latitude_circle,
    patch_family,
    primitive,
    prolonged_distribution,
    rotation_field_family,
    two_chart_patch_demo,
)
from engelforge.prolong import LocalFamily, observed_translation
from engelforge.errors import (
    NotImmersed,
    NotZeroIntegral,
    OverlapMismatch,
    PerturbationFailed,
)


def test_primitive_of_great_circle_is_a_circle():
    nu = primitive(great_circle())
    ts = np.linspace(0.0, 1.0, 17)
    expected = np.stack([
        np.sin(2 * np.pi * ts) / (2 * np.pi),
        (1.0 - np.cos(2 * np.pi * ts)) / (2 * np.pi),
        np.zeros_like(ts),
    ], axis=1)
    assert np.max(np.abs(nu.eval(ts) - expected)) < 1e-12


def test_primitive_requires_zero_integral():
    with pytest.raises(NotZeroIntegral):
        primitive(latitude_circle(0.6))


def test_primitive_indicatrix_roundtrip(fiber_curve):
    """The normalized derivative of the primitive recovers the direction of
    the original spherical curve (it has unit speed up to normalization)."""
    nu = primitive(fiber_curve)
    eta, residual, _turning = indicatrix(nu, samples=4096)
    assert residual < 1e-6
    grid = np.arange(512) / 512
    orig = fiber_curve.eval(grid)
    orig /= np.linalg.norm(orig, axis=1)[:, None]
    assert np.max(np.linalg.norm(eta.eval(grid) - orig, axis=1)) < 1e-5


def test_ensure_embedded_returns_embedded_input_unchanged(nu_embedded):
    out = ensure_embedded(nu_embedded, tol=1e-3)
    assert out is nu_embedded


def test_ensure_embedded_fails_honestly_at_impossible_tolerance(fiber_curve):
    nu = primitive(fiber_curve)
    with pytest.raises(PerturbationFailed):
        ensure_embedded(nu, tol=10.0, max_retries=1)


def test_family_values_match_per_curve_evaluation():
    rng = np.random.default_rng(31)
    fam = rotation_field_family(great_circle(), (4, 4, 4), amplitude=0.3)
    tgrid = rng.uniform(size=9)
    vals = family_values(fam, tgrid)
    dvals = family_values(fam, tgrid, derivative=1)
    for idx in (0, 17, 63):
        c = fam.node_curves[idx]
        assert np.allclose(vals[idx], c.eval(tgrid), atol=1e-12)
        assert np.allclose(dvals[idx], c.derivative().eval(tgrid), atol=1e-10)


def test_curve_at_reproduces_node_curves():
    fam = rotation_field_family(great_circle(), (8, 8, 8), amplitude=0.2)
    node = fam.node_grid()[137]
    at = fam.curve_at(node)
    c = fam.node_curves[137]
    rows = min(at.a.shape[0], c.a.shape[0])
    assert np.allclose(at.a[:rows], c.a[:rows], atol=1e-10)
    assert np.allclose(at.b[:rows], c.b[:rows], atol=1e-10)


def test_rotation_family_at_zoom_zero_is_constant():
    fam = rotation_field_family(great_circle(), (4, 4, 4), amplitude=0.2,
                                zoom=0.0)
    ref = fam.node_curves[0]
    for c in fam.node_curves[1:]:
        assert np.allclose(c.a, ref.a) and np.allclose(c.b, ref.b)


def test_prolonged_distribution_frames(fiber_curve):
    """Frames are {fiber direction, normalized curve value in the base}."""
    fam = base_independent_family(latitude_circle(0.6), (8, 8, 8))
    field = prolonged_distribution(fam, 16)
    frames = field.frames
    assert frames.shape == (8, 8, 8, 16, 2, 4)
    assert np.all(frames[..., 0, :] == [0.0, 0.0, 0.0, 1.0])
    tgrid = np.arange(16) / 16
    vals = latitude_circle(0.6).eval(tgrid)
    vals /= np.linalg.norm(vals, axis=1)[:, None]
    assert np.allclose(frames[0, 0, 0, :, 1, :3], vals, atol=1e-12)
    assert np.all(frames[..., 1, 3] == 0.0)


def test_derived_prolongation_is_base_independent_for_constant_family(fiber_curve):
    fam = fibrewise_integrate(base_independent_family(fiber_curve, (8, 8, 8)))
    field = derived_prolongation(fam, 32)
    frames = field.frames
    spread = np.ptp(frames, axis=(0, 1, 2))
    assert float(spread.max()) < 1e-12


def test_degenerate_direction_raises():
    # a curve passing through zero norm cannot define a direction field
    zero = PeriodicCurve.constant([0.0, 0.0, 0.0])
    fam = base_independent_family(zero, (4, 4, 4))
    with pytest.raises(NotImmersed):
        prolonged_distribution(fam, 8)


def test_two_chart_patch_zero_shift_is_trivial(nu_embedded):
    family, report, v_01 = two_chart_patch_demo(nu_embedded, delta=0.0)
    assert np.linalg.norm(v_01) < 1e-14
    assert report.max_translation_error < 1e-10
    assert report.max_derivative_error < 1e-10
    # the blended family agrees with the single section everywhere
    for c in family.node_curves:
        assert np.allclose(c.eval(np.linspace(0, 1, 9)),
                           nu_embedded.eval(np.linspace(0, 1, 9)), atol=1e-9)


def test_patching_detects_inconsistent_transitions(nu_embedded):
    """A wrong transition shift must be flagged, not silently blended."""
    grid_shape = (8, 8, 8)
    n_nodes = int(np.prod(grid_shape))
    delta = 0.25
    v_01 = nu_embedded.eval(delta) - nu_embedded.eval(0.0)
    shifted = nu_embedded.shifted(delta)
    a = shifted.a.copy()
    a[0] -= v_01
    g_0 = PeriodicCurve(a=a, b=shifted.b)
    all_nodes = np.arange(n_nodes)
    chart_0 = LocalFamily([g_0] * n_nodes, all_nodes)
    chart_1 = LocalFamily([nu_embedded] * n_nodes, all_nodes)
    partition = [np.full(n_nodes, 0.5), np.full(n_nodes, 0.5)]
    bad = Transition(chart_i=0, chart_j=1, delta=delta + 0.05)
    with pytest.raises(OverlapMismatch):
        patch_family([chart_0, chart_1], [bad], partition, grid_shape,
                     periodic=False)


def test_observed_translation_identity(nu_embedded):
    delta = 0.3
    v = nu_embedded.eval(delta) - nu_embedded.eval(0.0)
    shifted = nu_embedded.shifted(delta)
    a = shifted.a.copy()
    a[0] -= v
    g_0 = PeriodicCurve(a=a, b=shifted.b)
    mean, deviation = observed_translation(g_0, nu_embedded, delta)
    assert np.linalg.norm(mean - v) < 1e-10
    assert deviation < 1e-10


def test_wiggle_budget_constant():
    assert WIGGLE_BUDGET == 9
