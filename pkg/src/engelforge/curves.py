"""Closed curves in R^3 as truncated trigonometric series.

The circle is parametrized by t in [0,1). A curve is

    gamma(t) = a[0] + sum_k a[k] cos(2 pi k t) + b[k] sin(2 pi k t),

with per-coordinate real coefficients. Derivatives of any order are exact
operations on the coefficients; nothing in this module differentiates
numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import IllConditioned, NotImmersed, NotSpherical, NotSurrounding

TWO_PI = 2.0 * np.pi

DEFAULT_SAMPLES = 256
DEFAULT_DIRECTIONS = 512
SPHERE_TOL = 1e-6


@dataclass(frozen=True)
class PeriodicCurve:
    """Truncated trigonometric series S^1 -> R^dim (dim defaults to 3)."""

    a: np.ndarray  # (modes+1, dim) cosine coefficients; a[0] is the mean
    b: np.ndarray  # (modes+1, dim) sine coefficients; b[0] is ignored

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        if a.shape != b.shape:
            raise ValueError("coefficient arrays must have equal shapes")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        b = b.copy()
        b[0] = 0.0
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def modes(self) -> int:
        return self.a.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.a.shape[1]

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        """Evaluate at parameter(s) t; returns (dim,) or (N, dim)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.arange(self.modes + 1)
        ang = TWO_PI * np.outer(t_arr, k)
        out = np.cos(ang) @ self.a + np.sin(ang) @ self.b
        return out[0] if np.ndim(t) == 0 else out

    def derivative(self) -> "PeriodicCurve":
        """Exact termwise derivative as a new series."""
        k = np.arange(self.modes + 1, dtype=float)[:, None]
        return PeriodicCurve(a=TWO_PI * k * self.b, b=-TWO_PI * k * self.a)

    def antiderivative(self) -> "PeriodicCurve":
        """Termwise primitive with value 0 at t=0.

        Requires a vanishing mean (checked by callers that care); the mean
        coefficient is dropped.
        """
        k = np.arange(self.modes + 1, dtype=float)
        k[0] = 1.0  # avoid 0/0; row 0 is overwritten below
        k = k[:, None]
        a = -self.b / (TWO_PI * k)
        b = self.a / (TWO_PI * k)
        a[0] = -a[1:].sum(axis=0)  # so the primitive vanishes at t=0
        b[0] = 0.0
        return PeriodicCurve(a=a, b=b)

    def rotated(self, mat: np.ndarray) -> "PeriodicCurve":
        """Apply a constant linear map to the values (coefficients are linear)."""
        return PeriodicCurve(a=self.a @ mat.T, b=self.b @ mat.T)

    def shifted(self, delta: float) -> "PeriodicCurve":
        """Reparametrize t -> t + delta exactly on the coefficients."""
        k = np.arange(self.modes + 1, dtype=float)
        c, s = np.cos(TWO_PI * k * delta)[:, None], np.sin(TWO_PI * k * delta)[:, None]
        return PeriodicCurve(a=c * self.a + s * self.b, b=c * self.b - s * self.a)

    def to_json(self) -> dict:
        return {"modes": self.modes, "a": self.a.tolist(), "b": self.b.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "PeriodicCurve":
        return PeriodicCurve(a=np.asarray(obj["a"]), b=np.asarray(obj["b"]))

    @staticmethod
    def constant(value) -> "PeriodicCurve":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return PeriodicCurve(a=v[None, :], b=np.zeros((1, v.size)))


@dataclass(frozen=True)
class Jet3:
    """Value and first three derivatives of a curve at a parameter."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


@dataclass
class MarginReport:
    """Sampled scalar diagnostic along a curve with its certified minimum."""

    grid: np.ndarray
    values: np.ndarray
    min_value: float = field(init=False)
    argmin: float = field(init=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        i = int(np.argmin(self.values))  # lowest index wins on ties
        self.min_value = float(self.values[i])
        self.argmin = float(self.grid[i])

    def to_json(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "min_value": self.min_value,
            "argmin": self.argmin,
        }


def eval_jet(curve: PeriodicCurve, t) -> Jet3:
    """gamma, gamma', gamma'', gamma''' at t, analytically from the series."""
    d1 = curve.derivative()
    d2 = d1.derivative()
    d3 = d2.derivative()
    return Jet3(curve.eval(t), d1.eval(t), d2.eval(t), d3.eval(t))


def _uniform_grid(samples: int) -> np.ndarray:
    return np.arange(samples) / float(samples)


def sphericity_error(curve: PeriodicCurve, samples: int = 1024) -> float:
    """max_t | |gamma(t)| - 1 | on a dense grid."""
    vals = curve.eval(_uniform_grid(samples))
    return float(np.max(np.abs(np.linalg.norm(vals, axis=1) - 1.0)))


def convexity_margin(
    curve: PeriodicCurve,
    samples: int = DEFAULT_SAMPLES,
    sphere_tol: float = SPHERE_TOL,
) -> MarginReport:
    """det(gamma, gamma', gamma'') along the curve; convex iff min > 0.

    Raises NotSpherical when the curve strays from the unit sphere by more
    than sphere_tol (the determinant criterion is only meaningful there).
    """
    err = sphericity_error(curve, samples=max(samples, 512))
    if err > sphere_tol:
        raise NotSpherical(f"max | |gamma|-1 | = {err:.3e} > {sphere_tol:.1e}")
    grid = _uniform_grid(samples)
    g = curve.eval(grid)
    d1 = curve.derivative()
    d2 = d1.derivative()
    mats = np.stack([g, d1.eval(grid), d2.eval(grid)], axis=-1)
    return MarginReport(grid=grid, values=np.linalg.det(mats))


def turning_determinant(curve: PeriodicCurve, samples: int = DEFAULT_SAMPLES) -> MarginReport:
    """det(g', g'', g''') along a space curve (convexity of its indicatrix)."""
    grid = _uniform_grid(samples)
    d1 = curve.derivative()
    d2 = d1.derivative()
    d3 = d2.derivative()
    mats = np.stack([d1.eval(grid), d2.eval(grid), d3.eval(grid)], axis=-1)
    return MarginReport(grid=grid, values=np.linalg.det(mats))


def indicatrix(
    space_curve: PeriodicCurve,
    samples: int = 1024,
    modes: int | None = None,
    immersion_tol: float = 1e-9,
):
    """Normalized derivative curve eta = g'/|g'| refit as a series.

    Returns (eta_curve, refit_residual, turning_report) where turning_report
    is det(g', g'', g''') computed directly on the input (no refit error).
    """
    grid = _uniform_grid(samples)
    d1 = space_curve.derivative().eval(grid)
    speeds = np.linalg.norm(d1, axis=1)
    if np.min(speeds) <= immersion_tol:
        raise NotImmersed(f"min |g'| = {np.min(speeds):.3e}")
    eta = d1 / speeds[:, None]
    if modes is None:
        modes = min(max(2 * space_curve.modes, 8), (samples - 2) // 2)
    curve, residual = fit_fourier(grid, eta, modes)
    return curve, residual, turning_determinant(space_curve, samples=samples)


def curve_integral(curve: PeriodicCurve) -> np.ndarray:
    """Exact integral over one period: only the constant term survives."""
    return curve.a[0].copy()


def support_values(points: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """max over points of u . p for each direction u."""
    return (directions @ points.T).max(axis=1)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n roughly equidistributed unit vectors."""
    i = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    theta = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=1
    )


@dataclass
class SurroundReport:
    """Two-level estimate of min_u max_t u.gamma(t)."""

    margin: float
    direction: np.ndarray
    grid_resolution: float  # max angular gap of the coarse direction grid
    directions: int
    samples: int

    def to_json(self) -> dict:
        return {
            "margin": self.margin,
            "direction": self.direction.tolist(),
            "grid_resolution": self.grid_resolution,
            "directions": self.directions,
            "samples": self.samples,
        }


def surround_report(
    curve_or_points,
    directions: int = DEFAULT_DIRECTIONS,
    samples: int = DEFAULT_SAMPLES,
    refine: bool = True,
) -> SurroundReport:
    """Estimate rho = min_u max_t u.gamma(t); rho > 0 certifies strict surrounding.

    Coarse Fibonacci direction grid followed by local Nelder-Mead descent on
    the best candidates. Accepts a PeriodicCurve or an (N,3) point array.
    """
    if isinstance(curve_or_points, PeriodicCurve):
        pts = curve_or_points.eval(_uniform_grid(samples))
    else:
        pts = np.asarray(curve_or_points, dtype=float)
    dirs = fibonacci_sphere(directions)
    sup = support_values(pts, dirs)
    order = np.argsort(sup)
    best_val = float(sup[order[0]])
    best_dir = dirs[order[0]]
    if refine:
        for idx in order[:4]:
            u0 = dirs[idx]
            # local chart: u(xi) = normalize(u0 + xi1 e1 + xi2 e2)
            e1 = np.cross(u0, [0.0, 0.0, 1.0])
            if np.linalg.norm(e1) < 1e-8:
                e1 = np.cross(u0, [0.0, 1.0, 0.0])
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(u0, e1)

            def objective(xi, u0=u0, e1=e1, e2=e2):
                u = u0 + xi[0] * e1 + xi[1] * e2
                u /= np.linalg.norm(u)
                return float(np.max(pts @ u))

            res = minimize(objective, np.zeros(2), method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
            if res.fun < best_val:
                best_val = float(res.fun)
                u = u0 + res.x[0] * e1 + res.x[1] * e2
                best_dir = u / np.linalg.norm(u)
    resolution = 2.0 * np.sqrt(4.0 / directions)  # ~ sqrt of area per grid cell
    return SurroundReport(
        margin=best_val,
        direction=best_dir,
        grid_resolution=float(resolution),
        directions=directions,
        samples=pts.shape[0],
    )


def surround_margin(
    curve_or_points,
    directions: int = DEFAULT_DIRECTIONS,
    samples: int = DEFAULT_SAMPLES,
) -> float:
    """rho = min over unit u of max_t u.gamma(t); > 0 iff strictly surrounding."""
    return surround_report(curve_or_points, directions=directions, samples=samples).margin


def surrounds_origin_lp(points: np.ndarray) -> bool:
    """LP feasibility oracle: 0 is a convex combination of the sampled points.

    Test-only cross-check for surround_margin; exact on the sample set.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    a_eq = np.vstack([pts.T, np.ones(n)])
    b_eq = np.array([0.0, 0.0, 0.0, 1.0])
    res = linprog(np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return bool(res.status == 0)


def fit_fourier(
    ts,
    values,
    modes: int,
    cond_bound: float = 1e8,
):
    """Least-squares trigonometric fit of (t, value) samples.

    Returns (curve, max_residual). Raises IllConditioned when the design
    matrix condition number exceeds cond_bound.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] != ts.shape[0]:
        values = values.T
    if ts.shape[0] <= 2 * modes + 1:
        raise ValueError("need more than 2*modes+1 samples")
    k = np.arange(modes + 1)
    ang = TWO_PI * np.outer(ts, k)
    design = np.hstack([np.cos(ang), np.sin(ang[:, 1:])])
    cond = np.linalg.cond(design)
    if cond > cond_bound:
        raise IllConditioned(f"design condition {cond:.3e} > {cond_bound:.1e}")
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    a = coef[: modes + 1]
    b = np.vstack([np.zeros((1, values.shape[1])), coef[modes + 1 :]])
    curve = PeriodicCurve(a=a, b=b)
    residual = float(np.max(np.linalg.norm(curve.eval(ts) - values, axis=1)))
    return curve, residual


def fit_fourier_adaptive(
    ts,
    values,
    tol: float = 1e-7,
    start_modes: int = 16,
    max_modes: int = 320,
):
    """Increase the truncation order until the refit residual drops below tol."""
    modes = start_modes
    last_exc = None
    while modes <= max_modes:
        if ts.shape[0] <= 2 * modes + 1:
            break
        try:
            curve, residual = fit_fourier(ts, values, modes)
        except IllConditioned as exc:  # denser sampling needed; give up here
            last_exc = exc
            break
        if residual <= tol:
            return curve, residual
        modes = int(modes * 3 / 2) + 1
    if last_exc is not None:
        raise last_exc
    return curve, residual


# ---------------------------------------------------------------------------
# Stock curves


def latitude_circle(height: float, reverse: bool = False) -> PeriodicCurve:
    """Latitude circle z = height in its convex orientation for height > 0."""
    r = float(np.sqrt(1.0 - height * height))
    a = np.zeros((2, 3))
    b = np.zeros((2, 3))
    a[0, 2] = height
    a[1, 0] = r
    b[1, 1] = -r if reverse else r
    return PeriodicCurve(a=a, b=b)


def great_circle() -> PeriodicCurve:
    return latitude_circle(0.0)


def doubled_latitude_circle(height: float) -> PeriodicCurve:
    """Latitude circle traversed twice (frequency-2 series)."""
    r = float(np.sqrt(1.0 - height * height))
    a = np.zeros((3, 3))
    b = np.zeros((3, 3))
    a[0, 2] = height
    a[2, 0] = r
    b[2, 1] = r
    return PeriodicCurve(a=a, b=b)


def random_spherical_curve(
    rng: np.random.Generator,
    modes: int = 4,
    wobble: float = 0.25,
    base_height: float = 0.6,
    fit_modes: int = 24,
) -> PeriodicCurve:
    """Random smooth spherical curve: perturbed latitude circle, renormalized."""
    base = latitude_circle(base_height)
    amp = wobble / (1 + np.arange(modes + 1)[:, None]) ** 2
    pert_a = np.zeros((modes + 1, 3))
    pert_b = np.zeros((modes + 1, 3))
    pert_a[1:] = rng.normal(size=(modes, 3)) * amp[1:]
    pert_b[1:] = rng.normal(size=(modes, 3)) * amp[1:]
    rough = PeriodicCurve(
        a=_pad(base.a, modes + 1) + pert_a, b=_pad(base.b, modes + 1) + pert_b
    )
    grid = _uniform_grid(max(8 * fit_modes, 256))
    pts = rough.eval(grid)
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    curve, _ = fit_fourier(grid, pts, fit_modes)
    return curve


def random_surrounding_curve(
    rng: np.random.Generator,
    wobble: float = 0.35,
    fit_tol: float = 1e-9,
    max_draws: int = 20,
) -> PeriodicCurve:
    """Random smooth spherical curve that strictly surrounds the origin.

    A great circle with a deterministic z-wobble plus small random
    low-frequency terms, renormalized to the sphere and put in a uniformly
    random orientation.  Strict surrounding is verified on the result;
    degenerate draws are rejected and redrawn.
    """
    grid = _uniform_grid(512)
    for _ in range(max_draws):
        a = np.zeros((7, 3))
        b = np.zeros((7, 3))
        a[1, 0] = 1.0
        b[1, 1] = 1.0
        b[2, 2] = wobble * rng.uniform(0.6, 1.0)
        a[3, 2] = 0.2 * rng.normal()
        a[5, 2] = 0.1 * rng.normal()
        b[4, 0] = 0.05 * rng.normal()
        pts = PeriodicCurve(a=a, b=b).eval(grid)
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        # uniformly random rotation via QR of a Gaussian matrix
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q *= np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 2] = -q[:, 2]
        curve, _ = fit_fourier_adaptive(grid, pts @ q.T, tol=fit_tol)
        if surround_margin(curve) > 0.05:
            return curve
    raise NotSurrounding("failed to draw a strictly surrounding curve")


def _pad(coefs: np.ndarray, rows: int) -> np.ndarray:
    out = np.zeros((rows, coefs.shape[1]))
    out[: coefs.shape[0]] = coefs
    return out
