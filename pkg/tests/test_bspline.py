"""Unit tests for the tensor-product cubic B-spline interpolation model."""

import numpy as np

from engelforge import SplineGrid


def periodic_field(x):
    return np.sin(2 * np.pi * x[..., 0]) * np.cos(4 * np.pi * x[..., 1])


def test_node_exactness_periodic_and_box():
    n = 16
    axes = [np.arange(n) / n, np.arange(n) / n]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    data = periodic_field(mesh)
    sp = SplineGrid(data, (True, True))
    assert np.max(np.abs(sp.at_nodes((0, 0)) - data)) < 1e-12

    box_axes = [np.linspace(0, 1, n), np.linspace(0, 1, n)]
    box_mesh = np.stack(np.meshgrid(*box_axes, indexing="ij"), axis=-1)
    box_data = box_mesh[..., 0] ** 2 + 0.5 * box_mesh[..., 1]
    sp_box = SplineGrid(box_data, (False, False))
    assert np.max(np.abs(sp_box.at_nodes((0, 0)) - box_data)) < 1e-12


def test_eval_at_nodes_matches_at_nodes():
    n = 12
    rng = np.random.default_rng(21)
    data = rng.normal(size=(n, n))
    sp = SplineGrid(data, (True, False))
    axes = [np.arange(n) / n, np.linspace(0, 1, n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    for orders in ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0)):
        at = sp.at_nodes(orders).reshape(-1)
        ev = sp.eval(pts, orders=orders).reshape(-1)
        assert np.max(np.abs(at - ev)) < 1e-10, f"orders {orders}"


def test_derivatives_converge_to_smooth_field():
    """First/second spline derivatives approach analytic ones as n grows."""
    errs1, errs2 = [], []
    probe = np.linspace(0.05, 0.95, 41)[:, None]
    for n in (16, 32, 64):
        x = np.arange(n) / n
        sp = SplineGrid(np.sin(2 * np.pi * x), (True,))
        d1 = sp.eval(probe, orders=(1,))[:, ]
        d2 = sp.eval(probe, orders=(2,))
        true1 = 2 * np.pi * np.cos(2 * np.pi * probe[:, 0])
        true2 = -(2 * np.pi) ** 2 * np.sin(2 * np.pi * probe[:, 0])
        errs1.append(np.max(np.abs(d1.ravel() - true1)))
        errs2.append(np.max(np.abs(d2.ravel() - true2)))
    # cubic interpolation: first derivative error contracts ~ h^3 (>= 6x per
    # halving), second ~ h^2 (>= 3x)
    assert errs1[0] / errs1[1] > 6 and errs1[1] / errs1[2] > 6
    assert errs2[0] / errs2[1] > 3 and errs2[1] / errs2[2] > 3


def test_mixed_partial_matches_finite_differences():
    n = 32
    axes = [np.arange(n) / n] * 2
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    sp = SplineGrid(periodic_field(mesh), (True, True))
    p = np.array([[0.31, 0.47]])
    h = 1e-4
    mixed = sp.eval(p, orders=(1, 1))[0]
    corners = [
        sp.eval(p + [[sx * h, sy * h]])[0]
        for sx, sy in ((1, 1), (1, -1), (-1, 1), (-1, -1))
    ]
    fd = (corners[0] - corners[1] - corners[2] + corners[3]) / (4 * h * h)
    assert abs(mixed - fd) < 1e-4 * max(1.0, abs(mixed))


def test_field_shape_is_preserved():
    rng = np.random.default_rng(22)
    data = rng.normal(size=(8, 8, 8, 5, 3))
    sp = SplineGrid(data, (True, True, False))
    assert sp.at_nodes((0, 0, 0)).shape == data.shape
    out = sp.eval(np.array([[0.1, 0.2, 0.3]]))
    assert out.shape == (1, 5, 3)
