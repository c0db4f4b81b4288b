"""Curve families over 3-dimensional base grids and their prolongations.

A family assigns a trigonometric-series curve to every node of a base grid
(a periodic fundamental domain or a unit box); between nodes the series
coefficients are interpolated tricubically, so base-derivative jets come
from a single smooth model.  Fibrewise integration turns a family of
zero-integral sphere curves into a family of closed space curves; the
derived prolongation frames the rank-2 plane field {d/dt, sum_i eta_i
d/dx_i} spanned by the fiber direction and the fibrewise tangent
indicatrix, with all jets needed for bracket computations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bspline import SplineGrid
from .curves import PeriodicCurve, indicatrix, turning_determinant
from .errors import (
    DegenerateFrame,
    NotImmersed,
    NotZeroIntegral,
    OverlapMismatch,
    PerturbationFailed,
)

#: Wiggle-multiplicity budget used by the source construction (2*4+1); kept
#: as a named constant for reference, desk-scale runs use far less.
WIGGLE_BUDGET = 9


# ---------------------------------------------------------------------------
# Fibrewise primitives


def primitive(curve: PeriodicCurve) -> PeriodicCurve:
    """Termwise primitive nu(t) = int_0^t gamma with nu(0) = 0.

    Requires a (numerically) vanishing curve integral so that the primitive
    closes up; raises NotZeroIntegral otherwise.
    """
    drift = float(np.linalg.norm(curve.a[0]))
    if drift > 1e-9:
        raise NotZeroIntegral(f"curve integral has norm {drift:.3e} > 1e-9")
    balanced = PeriodicCurve(
        a=np.vstack([np.zeros((1, curve.dim)), curve.a[1:]]), b=curve.b
    )
    return balanced.antiderivative()


def ensure_embedded(
    space_curve: PeriodicCurve,
    tol: float = 1e-3,
    samples: int = 512,
    rng: np.random.Generator | None = None,
    max_retries: int = 8,
) -> PeriodicCurve:
    """Return an embedded curve within a small perturbation of the input.

    Embeddedness at tolerance tol means: no two samples whose parameter
    separation is large enough that the arc between them cannot stay within
    tol come closer than tol in space.  If the input fails, random
    high-frequency perturbations of decreasing sup-norm are tried (up to
    ``max_retries``), each checked to keep the tangent indicatrix convexity
    margin positive.
    """
    base_margin = turning_determinant(space_curve).min_value
    if base_margin <= 0.0:
        raise NotImmersed("tangent indicatrix is not convex")
    if rng is None:
        rng = np.random.default_rng(0)
    curve = space_curve
    eps = 1e-4
    for attempt in range(max_retries + 1):
        gap = _self_gap(curve, samples)
        if gap >= tol:
            return curve
        if attempt == max_retries:
            break
        # random high-frequency perturbation, sup-norm ~ eps, with the
        # frequency weight halved at each retry so smoothness degrades
        # slowly relative to the shrinking amplitude
        k0 = curve.modes + 3
        pert_a = np.zeros((k0 + 5, curve.dim))
        pert_b = np.zeros((k0 + 5, curve.dim))
        weights = eps / (2.0 ** np.arange(4))[:, None]
        pert_a[k0 : k0 + 4] = rng.normal(size=(4, curve.dim)) * weights / 4.0
        pert_b[k0 : k0 + 4] = rng.normal(size=(4, curve.dim)) * weights / 4.0
        candidate = PeriodicCurve(
            a=_pad_rows(curve.a, k0 + 5) + pert_a,
            b=_pad_rows(curve.b, k0 + 5) + pert_b,
        )
        if turning_determinant(candidate).min_value > 0.0:
            curve = candidate
        eps /= 2.0
    raise PerturbationFailed(
        f"self-gap {_self_gap(curve, samples):.3e} < tol {tol:.3e} "
        f"after {max_retries} retries"
    )


def _self_gap(curve: PeriodicCurve, samples: int) -> float:
    """Smallest distance between samples that are far apart in parameter."""
    grid = np.arange(samples) / samples
    pts = curve.eval(grid)
    speed = np.linalg.norm(curve.derivative().eval(grid), axis=1)
    min_speed = float(speed.min())
    if min_speed <= 0.0:
        raise NotImmersed("fibrewise speed vanishes")
    diam = float(np.ptp(pts, axis=0).max())
    # parameter window inside which chord distances are dominated by speed
    window = max(2.0 / samples, min(0.25, diam / min_speed / 4.0))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    sep = np.abs(grid[:, None] - grid[None, :])
    sep = np.minimum(sep, 1.0 - sep)
    dist[sep < window] = np.inf
    return float(dist.min())


def _pad_rows(coefs: np.ndarray, rows: int) -> np.ndarray:
    out = np.zeros((rows, coefs.shape[1]))
    out[: coefs.shape[0]] = coefs
    return out


# ---------------------------------------------------------------------------
# Families


def _stack_coefficients(curves) -> np.ndarray:
    """Pack curves into one array (n_curves, 2, modes+1, dim), zero-padded."""
    rows = max(c.modes + 1 for c in curves)
    dim = curves[0].dim
    out = np.zeros((len(curves), 2, rows, dim))
    for i, c in enumerate(curves):
        out[i, 0, : c.modes + 1] = c.a
        out[i, 1, : c.modes + 1] = c.b
    return out


@dataclass
class CurveFamily:
    """Per-node curves over a 3-axis base grid with tricubic interpolation."""

    node_curves: list
    grid_shape: tuple
    periodic: bool = True

    def __post_init__(self):
        self.grid_shape = tuple(int(n) for n in self.grid_shape)
        if len(self.node_curves) != int(np.prod(self.grid_shape)):
            raise ValueError("node count does not match grid shape")
        self._spline = None

    def with_node_curves(self, curves) -> "CurveFamily":
        return replace(self, node_curves=list(curves))

    def node_grid(self) -> np.ndarray:
        """Base coordinates of the grid nodes, shape (n_nodes, 3)."""
        axes = [
            np.arange(n) / n if self.periodic else np.linspace(0.0, 1.0, n)
            for n in self.grid_shape
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def _coefficient_spline(self) -> SplineGrid:
        if self._spline is None:
            coefs = _stack_coefficients(self.node_curves)
            data = coefs.reshape(self.grid_shape + coefs.shape[1:])
            self._spline = SplineGrid(data, (self.periodic,) * 3)
        return self._spline

    def curve_at(self, x) -> PeriodicCurve:
        """Interpolated curve at base point x (tricubic on coefficients)."""
        coefs = self._coefficient_spline().eval(np.asarray(x, dtype=float))[0]
        return PeriodicCurve(a=coefs[0], b=coefs[1])

    def to_json(self) -> dict:
        return {
            "grid_shape": list(self.grid_shape),
            "periodic": self.periodic,
            "node_curves": [c.to_json() for c in self.node_curves],
        }

    @classmethod
    def from_json(cls, obj: dict):
        return cls(
            node_curves=[PeriodicCurve.from_json(c) for c in obj["node_curves"]],
            grid_shape=tuple(obj["grid_shape"]),
            periodic=bool(obj["periodic"]),
        )


@dataclass
class BundleImmersionFamily(CurveFamily):
    """Family of closed space curves, fibrewise immersed."""

    def min_fiber_speed(self, samples: int = 256) -> float:
        grid = np.arange(samples) / samples
        worst = np.inf
        for c in self.node_curves:
            speed = np.linalg.norm(c.derivative().eval(grid), axis=1)
            worst = min(worst, float(speed.min()))
        return worst

    def indicatrix_family(self) -> CurveFamily:
        return CurveFamily(
            node_curves=[indicatrix(c)[0] for c in self.node_curves],
            grid_shape=self.grid_shape,
            periodic=self.periodic,
        )


def fibrewise_integrate(family: CurveFamily) -> BundleImmersionFamily:
    """Primitive of every node curve (closedness checked per node)."""
    return BundleImmersionFamily(
        node_curves=[primitive(c) for c in family.node_curves],
        grid_shape=family.grid_shape,
        periodic=family.periodic,
    )


def base_independent_family(
    curve: PeriodicCurve, grid_shape=(8, 8, 8), periodic: bool = True
) -> CurveFamily:
    """The constant family: the same curve at every base node."""
    n = int(np.prod(grid_shape))
    return CurveFamily([curve] * n, tuple(grid_shape), periodic)


def rotation_field_family(
    curve: PeriodicCurve,
    grid_shape=(8, 8, 8),
    amplitude: float = 0.2,
    zoom: float = 1.0,
    periodic: bool = True,
) -> CurveFamily:
    """Base-dependent family gamma(x, t) = R(zoom * x) gamma0(t).

    R(x) = exp(amplitude * sum_i sin(2 pi x_i) K_i) with K_i the standard
    rotation generators; at zoom -> 0 the family converges to the constant
    family at R(0) = Id.
    """
    fam = base_independent_family(curve, grid_shape, periodic)
    xs = fam.node_grid() * zoom
    omega = amplitude * np.sin(2.0 * np.pi * xs)
    curves = [curve.rotated(_rodrigues(w)) for w in omega]
    return CurveFamily(curves, tuple(grid_shape), periodic)


def _rodrigues(omega: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    k = np.array(
        [
            [0.0, -omega[2], omega[1]],
            [omega[2], 0.0, -omega[0]],
            [-omega[1], omega[0], 0.0],
        ]
    )
    if theta < 1e-12:
        return np.eye(3) + k
    return (
        np.eye(3)
        + np.sin(theta) / theta * k
        + (1.0 - np.cos(theta)) / theta**2 * (k @ k)
    )


# ---------------------------------------------------------------------------
# Two-chart patching


@dataclass(frozen=True)
class Transition:
    """Constant fiber shift between two chart trivializations.

    On the overlap of charts i and j, the local sections satisfy
    g_i(t - delta) = g_j(t) - v_ij with v_ij = int_0^delta of the fibrewise
    derivative of g_j.
    """

    chart_i: int
    chart_j: int
    delta: float


@dataclass
class LocalFamily:
    """A chart's local section: curves over a subset of global grid nodes."""

    node_curves: list
    node_index: np.ndarray  # (n_nodes,) flat indices into the global grid

    def __post_init__(self):
        self.node_index = np.asarray(self.node_index, dtype=int)
        self._lookup = {int(k): i for i, k in enumerate(self.node_index)}

    def curve_at_node(self, flat_index: int) -> PeriodicCurve:
        return self.node_curves[self._lookup[int(flat_index)]]


@dataclass
class PatchReport:
    max_translation_error: float
    max_derivative_error: float

    def to_json(self) -> dict:
        return {
            "max_translation_error": self.max_translation_error,
            "max_derivative_error": self.max_derivative_error,
        }


def observed_translation(
    g_i: PeriodicCurve, g_j: PeriodicCurve, delta: float, samples: int = 256
):
    """(mean translation, deviation from constancy) of g_j(t) - g_i(t - delta)."""
    grid = np.arange(samples) / samples
    diff = g_j.eval(grid) - g_i.eval(grid - delta)
    mean = diff.mean(axis=0)
    return mean, float(np.max(np.linalg.norm(diff - mean, axis=1)))


def patch_family(
    local_families,
    transitions,
    partition,
    grid_shape,
    periodic: bool = False,
    tol: float = 1e-8,
    samples: int = 256,
):
    """Blend local sections into a global family with a partition of unity.

    ``partition`` is one weight array per chart over the full global grid
    (supported on the chart's nodes, summing to 1 everywhere).  On every
    overlap node the observed translation between charts is checked against
    the recomputed integral of the fibrewise derivative over the shift, and
    the blended output is checked to leave fibrewise derivatives unchanged;
    both to ``tol`` (OverlapMismatch otherwise).  Returns (family, report).
    """
    grid_shape = tuple(int(n) for n in grid_shape)
    n_nodes = int(np.prod(grid_shape))
    weights = [np.asarray(w, dtype=float).reshape(-1) for w in partition]
    if len(weights) != len(local_families):
        raise ValueError("one partition weight array per chart required")
    total = np.sum(weights, axis=0)
    if np.max(np.abs(total - 1.0)) > 1e-12:
        raise ValueError("partition weights must sum to 1 at every node")

    grid = np.arange(samples) / samples
    max_translation_error = 0.0

    # overlap verification: observed translation vs integral of the derivative
    for tr in transitions:
        loc_i = local_families[tr.chart_i]
        loc_j = local_families[tr.chart_j]
        common = np.intersect1d(loc_i.node_index, loc_j.node_index)
        for k in common:
            g_i = loc_i.curve_at_node(k)
            g_j = loc_j.curve_at_node(k)
            v_obs, wobble = observed_translation(g_i, g_j, tr.delta, samples)
            v_ref = g_j.eval(tr.delta) - g_j.eval(0.0)
            err = max(wobble, float(np.linalg.norm(v_obs - v_ref)))
            max_translation_error = max(max_translation_error, err)
            if err > tol:
                raise OverlapMismatch(
                    f"node {int(k)}: translation error {err:.3e} > {tol:.1e}"
                )

    # align every chart to chart 0's trivialization by chaining shifts
    shifts = {0: 0.0}
    pending = list(transitions)
    while pending:
        progress = False
        for tr in list(pending):
            if tr.chart_i in shifts and tr.chart_j not in shifts:
                shifts[tr.chart_j] = shifts[tr.chart_i] + tr.delta
                pending.remove(tr)
                progress = True
            elif tr.chart_j in shifts and tr.chart_i not in shifts:
                shifts[tr.chart_i] = shifts[tr.chart_j] - tr.delta
                pending.remove(tr)
                progress = True
            elif tr.chart_i in shifts and tr.chart_j in shifts:
                pending.remove(tr)
                progress = True
        if not progress:
            raise ValueError("transition graph does not reach chart 0")
    for idx in range(len(local_families)):
        shifts.setdefault(idx, 0.0)

    aligned = [
        [c.shifted(shifts[ci]) for c in loc.node_curves]
        for ci, loc in enumerate(local_families)
    ]

    # blend aligned sections node by node
    node_curves = []
    max_derivative_error = 0.0
    for k in range(n_nodes):
        parts = []
        for ci, loc in enumerate(local_families):
            w = weights[ci][k]
            if w == 0.0 and int(k) not in loc._lookup:
                continue
            if int(k) not in loc._lookup:
                raise ValueError(f"partition weight off chart {ci} at node {k}")
            parts.append((w, aligned[ci][loc._lookup[int(k)]]))
        if not parts:
            raise ValueError(f"node {k} not covered by any chart")
        rows = max(c.modes + 1 for _, c in parts)
        a = np.zeros((rows, parts[0][1].dim))
        b = np.zeros_like(a)
        for w, c in parts:
            a[: c.modes + 1] += w * c.a
            b[: c.modes + 1] += w * c.b
        blended = PeriodicCurve(a=a, b=b)
        dv = blended.derivative().eval(grid)
        for _, c in parts:
            err = float(np.max(np.linalg.norm(dv - c.derivative().eval(grid), axis=1)))
            max_derivative_error = max(max_derivative_error, err)
            if err > tol:
                raise OverlapMismatch(
                    f"node {k}: fibrewise derivative changed by {err:.3e}"
                )
        node_curves.append(blended)

    family = BundleImmersionFamily(node_curves, grid_shape, periodic)
    return family, PatchReport(max_translation_error, max_derivative_error)


def two_chart_patch_demo(
    nu_curve: PeriodicCurve,
    delta: float = 0.25,
    grid_shape=(8, 8, 8),
    tol: float = 1e-8,
):
    """Patch two overlapping box charts carrying the same fiber curve.

    Chart 1 holds g_1 = nu at every node of the right portion of the grid;
    chart 0 holds the transitioned section g_0(t) = g_1(t + delta) - v_01
    with v_01 = g_1(delta) - g_1(0) on the left portion.  The charts overlap
    in the middle third of the first base axis, where a linear-in-index
    partition of unity blends them.  Returns (family, report, v_01).
    """
    grid_shape = tuple(int(n) for n in grid_shape)
    n1 = grid_shape[0]
    if n1 < 3:
        raise ValueError("need at least 3 nodes along the first axis")
    lo, hi = n1 // 3, n1 - n1 // 3  # overlap: indices in [lo, hi)

    v_01 = nu_curve.eval(delta) - nu_curve.eval(0.0)
    g_1 = nu_curve
    shifted = nu_curve.shifted(delta)
    a = shifted.a.copy()
    a[0] -= v_01
    g_0 = PeriodicCurve(a=a, b=shifted.b)

    flat_index = np.arange(int(np.prod(grid_shape))).reshape(grid_shape)
    idx_0 = flat_index[:hi].reshape(-1)
    idx_1 = flat_index[lo:].reshape(-1)
    chart_0 = LocalFamily([g_0] * idx_0.size, idx_0)
    chart_1 = LocalFamily([g_1] * idx_1.size, idx_1)

    i1 = np.broadcast_to(
        np.arange(n1)[:, None, None], grid_shape
    ).reshape(-1)
    ramp = np.clip((hi - i1) / float(hi - lo), 0.0, 1.0)
    partition = [ramp, 1.0 - ramp]

    family, report = patch_family(
        [chart_0, chart_1],
        [Transition(chart_i=0, chart_j=1, delta=delta)],
        partition,
        grid_shape,
        periodic=False,
        tol=tol,
    )
    return family, report, v_01


# ---------------------------------------------------------------------------
# Plane fields and the derived prolongation


def spectral_t_derivative(data: np.ndarray, order: int = 1, axis: int = 3):
    """Spectral derivative along a uniformly sampled periodic axis."""
    nt = data.shape[axis]
    spec = np.fft.rfft(data, axis=axis)
    k = np.arange(spec.shape[axis], dtype=float)
    factor = (2j * np.pi * k) ** order
    if nt % 2 == 0 and order % 2 == 1:
        factor[-1] = 0.0  # odd derivative of the Nyquist mode is not resolvable
    shape = [1] * data.ndim
    shape[axis] = spec.shape[axis]
    return np.fft.irfft(spec * factor.reshape(shape), n=nt, axis=axis)


def grid_jets(values: np.ndarray, periodic: bool) -> np.ndarray:
    """First derivatives of a gridded field along (x1, x2, x3, t).

    ``values`` has shape (n1, n2, n3, nt) + field_shape; the result appends
    a final axis of length 4 with the derivative direction.  Base
    derivatives come from the tricubic spline model, the fiber derivative is
    spectral.
    """
    sp = SplineGrid(values, (periodic,) * 3)
    parts = [
        sp.at_nodes((1, 0, 0)),
        sp.at_nodes((0, 1, 0)),
        sp.at_nodes((0, 0, 1)),
        spectral_t_derivative(values),
    ]
    return np.stack(parts, axis=-1)


@dataclass
class PlaneField:
    """Two frame vector fields on a (base grid) x S^1 sample grid.

    ``frames`` has shape (n1, n2, n3, nt, 2, 4); components are expressed in
    (x1, x2, x3, t) coordinates.  Jets are computed lazily from the
    spline-in-base / spectral-in-fiber model of the stored components.
    """

    frames: np.ndarray
    periodic: bool = True

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 6 or self.frames.shape[4:] != (2, 4):
            raise ValueError("frames must have shape grid + (nt, 2, 4)")
        gram = self.gram_margins()
        if float(gram.min()) <= 0.0:
            raise DegenerateFrame(
                f"frame Gram margin {float(gram.min()):.3e} at a sample"
            )
        self._jets = None

    @property
    def grid_shape(self):
        return self.frames.shape[:3]

    @property
    def fiber_samples(self) -> int:
        return self.frames.shape[3]

    def gram_margins(self) -> np.ndarray:
        """Normalized Gram determinant of the two frame vectors per sample."""
        x1 = self.frames[..., 0, :]
        x2 = self.frames[..., 1, :]
        n1 = np.linalg.norm(x1, axis=-1)
        n2 = np.linalg.norm(x2, axis=-1)
        g11 = np.sum(x1 * x1, axis=-1)
        g12 = np.sum(x1 * x2, axis=-1)
        g22 = np.sum(x2 * x2, axis=-1)
        det = g11 * g22 - g12 * g12
        return np.sqrt(np.maximum(det, 0.0)) / np.maximum(n1 * n2, 1e-300)

    def jets(self):
        """(frames, d frames) with the derivative direction appended last."""
        if self._jets is None:
            self._jets = grid_jets(self.frames, self.periodic)
        return self.frames, self._jets

    def sample_points(self) -> np.ndarray:
        """(N, 4) array of (x1, x2, x3, t) sample coordinates, row-major."""
        n1, n2, n3 = self.grid_shape
        nt = self.fiber_samples
        axes = [
            np.arange(n) / n if self.periodic else np.linspace(0.0, 1.0, n)
            for n in (n1, n2, n3)
        ] + [np.arange(nt) / nt]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_csv(self, path):
        """Write (x, t, frame vectors) rows for plotting."""
        pts = self.sample_points()
        flat = self.frames.reshape(-1, 8)
        header = "x1,x2,x3,t," + ",".join(
            f"f{i}_{c}" for i in (1, 2) for c in ("x1", "x2", "x3", "t")
        )
        np.savetxt(
            path,
            np.hstack([pts, flat]),
            delimiter=",",
            header=header,
            comments="",
            fmt="%.17g",
        )


def family_values(family: CurveFamily, tgrid, derivative: int = 0) -> np.ndarray:
    """Evaluate every node curve on a common t-grid in one batched product.

    Returns (n_nodes, len(tgrid), dim); ``derivative`` applies the exact
    termwise derivative that many times before evaluation.
    """
    coefs = _stack_coefficients(family.node_curves)
    a, b = coefs[:, 0], coefs[:, 1]
    k = np.arange(a.shape[1], dtype=float)[None, :, None]
    for _ in range(derivative):
        a, b = 2.0 * np.pi * k * b, -2.0 * np.pi * k * a
    ang = 2.0 * np.pi * np.outer(np.asarray(tgrid, dtype=float), k[0, :, 0])
    vals = np.tensordot(np.cos(ang), a, axes=([1], [1])) + np.tensordot(
        np.sin(ang), b, axes=([1], [1])
    )
    return np.swapaxes(vals, 0, 1)


def _direction_frames(directions, shape, fiber_samples, periodic) -> PlaneField:
    frames = np.zeros(shape + (fiber_samples, 2, 4))
    frames[..., 0, 3] = 1.0  # the fiber direction d/dt
    frames[..., 1, :3] = directions.reshape(shape + (fiber_samples, 3))
    return PlaneField(frames, periodic=periodic)


def prolonged_distribution(
    family: CurveFamily, fiber_samples: int = 64
) -> PlaneField:
    """Plane field {d/dt, sum_i f_i d/dx_i} of a sphere-curve family f.

    Node curve values are normalized on sampling; raises NotImmersed when a
    value drops below norm 1e-10.
    """
    grid = np.arange(fiber_samples) / fiber_samples
    vals = family_values(family, grid)
    norms = np.linalg.norm(vals, axis=-1)
    if float(norms.min()) <= 1e-10:
        raise NotImmersed(f"direction norm {norms.min():.3e} at a node")
    dirs = vals / norms[..., None]
    return _direction_frames(dirs, family.grid_shape, fiber_samples, family.periodic)


def derived_prolongation(
    family: BundleImmersionFamily, fiber_samples: int = 64
) -> PlaneField:
    """Plane field {d/dt, sum_i eta_i d/dx_i}, eta the fibrewise indicatrix.

    eta(x, t) = d_t nu / |d_t nu| is sampled on the (grid x S^1) lattice;
    raises NotImmersed when the fibrewise speed drops below 1e-10.
    """
    grid = np.arange(fiber_samples) / fiber_samples
    vel = family_values(family, grid, derivative=1)
    speed = np.linalg.norm(vel, axis=-1)
    if float(speed.min()) <= 1e-10:
        raise NotImmersed(f"fibrewise speed {speed.min():.3e} at a node")
    eta = vel / speed[..., None]
    return _direction_frames(eta, family.grid_shape, fiber_samples, family.periodic)
