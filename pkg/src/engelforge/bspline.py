"""Uniform cubic B-spline interpolation on grids, with derivative jets.

Used as the base-coordinate interpolation model for curve families and
frame fields: values are interpolated exactly at grid nodes, and first and
second derivatives come from the same spline, so every downstream
derivative is consistent with a single twice-differentiable model.

Axes are either periodic (grid of n nodes covering [0,1) with spacing 1/n)
or box axes (n nodes covering [0,1] with spacing 1/(n-1), natural boundary
conditions).  The periodic prefilter divides the DFT of the data by the
B-spline symbol (4 + 2 cos(2 pi k / n)) / 6; box axes solve the tridiagonal
interpolation system with two natural end conditions.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def _basis_weights(w: np.ndarray, order: int) -> np.ndarray:
    """Weights of the 4 active cubic B-splines at local coordinate w in [0,1).

    Returns shape w.shape + (4,); ``order`` is the derivative order (0..2)
    with respect to w (grid units).
    """
    w = np.asarray(w, dtype=float)
    out = np.empty(w.shape + (4,))
    if order == 0:
        out[..., 0] = (1.0 - w) ** 3 / 6.0
        out[..., 1] = (3.0 * w**3 - 6.0 * w**2 + 4.0) / 6.0
        out[..., 2] = (-3.0 * w**3 + 3.0 * w**2 + 3.0 * w + 1.0) / 6.0
        out[..., 3] = w**3 / 6.0
    elif order == 1:
        out[..., 0] = -0.5 * (1.0 - w) ** 2
        out[..., 1] = (9.0 * w**2 - 12.0 * w) / 6.0
        out[..., 2] = (-9.0 * w**2 + 6.0 * w + 3.0) / 6.0
        out[..., 3] = 0.5 * w**2
    elif order == 2:
        out[..., 0] = 1.0 - w
        out[..., 1] = 3.0 * w - 2.0
        out[..., 2] = 1.0 - 3.0 * w
        out[..., 3] = w
    else:
        raise ValueError("cubic spline jets stop at order 2")
    return out


def _prefilter_periodic(data: np.ndarray, axis: int) -> np.ndarray:
    n = data.shape[axis]
    symbol = (4.0 + 2.0 * np.cos(2.0 * np.pi * np.arange(n) / n)) / 6.0
    shape = [1] * data.ndim
    shape[axis] = n
    spec = np.fft.fft(data, axis=axis) / symbol.reshape(shape)
    return np.real(np.fft.ifft(spec, axis=axis))


def _prefilter_natural(data: np.ndarray, axis: int) -> np.ndarray:
    """Coefficients along a box axis: n nodes -> n+2 coefficients.

    Natural end conditions (vanishing second derivative) pin the two edge
    coefficients to the edge data values and leave a tridiagonal system for
    the interior.
    """
    moved = np.moveaxis(data, axis, 0)
    n = moved.shape[0]
    if n < 4:
        raise ValueError("box axes need at least 4 nodes")
    flat = moved.reshape(n, -1)
    coef = np.empty((n + 2, flat.shape[1]))
    coef[1] = flat[0]
    coef[n] = flat[n - 1]
    m = n - 2  # unknowns c_2 .. c_{n-1}
    rhs = 6.0 * flat[1 : n - 1].copy()
    rhs[0] -= flat[0]
    rhs[-1] -= flat[n - 1]
    ab = np.zeros((3, m))
    ab[0, 1:] = 1.0
    ab[1, :] = 4.0
    ab[2, :-1] = 1.0
    coef[2:n] = solve_banded((1, 1), ab, rhs)
    coef[0] = 2.0 * coef[1] - coef[2]
    coef[n + 1] = 2.0 * coef[n] - coef[n - 1]
    return np.moveaxis(coef.reshape((n + 2,) + moved.shape[1:]), 0, axis)


class SplineGrid:
    """Tensor-product cubic B-spline model over a d-axis unit grid.

    ``data`` has shape grid_shape + field_shape; ``periodic`` is one flag
    per grid axis.  Values at grid nodes reproduce ``data`` exactly.
    """

    def __init__(self, data, periodic):
        data = np.asarray(data, dtype=float)
        self.periodic = tuple(bool(p) for p in periodic)
        self.ndim_grid = len(self.periodic)
        self.grid_shape = data.shape[: self.ndim_grid]
        self.field_shape = data.shape[self.ndim_grid :]
        coef = data
        for axis, per in enumerate(self.periodic):
            coef = (
                _prefilter_periodic(coef, axis)
                if per
                else _prefilter_natural(coef, axis)
            )
        self.coef = coef

    def _axis_scale(self, axis: int) -> float:
        n = self.grid_shape[axis]
        return float(n if self.periodic[axis] else n - 1)

    def at_nodes(self, orders) -> np.ndarray:
        """Derivative field on the full grid; orders is one entry per axis."""
        out = self.coef
        for axis, order in enumerate(orders):
            out = self._node_stencil(out, axis, order)
        return out

    def _node_stencil(self, coef: np.ndarray, axis: int, order: int) -> np.ndarray:
        scale = self._axis_scale(axis) ** order
        w = _basis_weights(np.zeros(1), order)[0] * scale  # offsets -1, 0, +1, +2
        if self.periodic[axis]:
            out = (
                w[0] * np.roll(coef, 1, axis=axis)
                + w[1] * coef
                + w[2] * np.roll(coef, -1, axis=axis)
            )
            if w[3] != 0.0:
                out += w[3] * np.roll(coef, -2, axis=axis)
            return out
        n = self.grid_shape[axis]
        moved = np.moveaxis(coef, axis, 0)  # length n + 2
        out = w[0] * moved[0:n] + w[1] * moved[1 : n + 1] + w[2] * moved[2 : n + 2]
        # w[3] is 0 at w=0 for every order <= 2
        return np.moveaxis(out, 0, axis)

    def eval(self, points, orders=None) -> np.ndarray:
        """Evaluate the (derivative) model at arbitrary points (N, d)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if orders is None:
            orders = (0,) * self.ndim_grid
        idx = []
        wts = []
        for axis in range(self.ndim_grid):
            n = self.grid_shape[axis]
            x = pts[:, axis]
            if self.periodic[axis]:
                u = (x % 1.0) * n
                i = np.floor(u).astype(int) % n
                w = u - np.floor(u)
                base = (np.arange(-1, 3)[None, :] + i[:, None]) % n
            else:
                u = np.clip(x, 0.0, 1.0) * (n - 1)
                i = np.minimum(np.floor(u).astype(int), n - 2)
                w = u - i
                base = np.arange(0, 4)[None, :] + i[:, None]
            scale = self._axis_scale(axis) ** orders[axis]
            idx.append(base)
            wts.append(_basis_weights(w, orders[axis]) * scale)
        flat_field = self.coef.reshape(self.coef.shape[: self.ndim_grid] + (-1,))
        npts = pts.shape[0]
        acc = np.zeros((npts, flat_field.shape[-1]))
        for offsets in np.ndindex(*(4,) * self.ndim_grid):
            gather = flat_field[
                tuple(idx[ax][:, off] for ax, off in enumerate(offsets))
            ]
            weight = np.ones(npts)
            for ax, off in enumerate(offsets):
                weight = weight * wts[ax][:, off]
            acc += weight[:, None] * gather
        return acc.reshape((npts,) + self.field_shape)
