"""Curve surgery: graftable arcs, the grafting homotopy, and wiggle detection.

Piecewise curves are assembled from spherical circle arcs and slices of
existing series curves, reparametrized at constant speed, blended at the
junctions, and refit as trigonometric series.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.spatial.distance import cdist

from .curves import PeriodicCurve, convexity_margin, surround_margin
from .errors import ConvexityLost, NotGraftable

Z_AXIS = np.array([0.0, 0.0, 1.0])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _frame(axis: np.ndarray):
    """Orthonormal u, v with (axis, u, v) right-handed."""
    helper = np.array([0.0, 0.0, 1.0])
    if abs(axis @ helper) > 0.9:
        helper = np.array([1.0, 0.0, 0.0])
    u = np.cross(helper, axis)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    return u, v


class CircleArc:
    """Arc of a spherical circle traversed counterclockwise around its axis.

    Counterclockwise around the axis is the convex orientation for radii
    below pi/2, so every arc in an assembly is individually convex.
    """

    def __init__(self, axis, rho, u, v, span):
        self.axis = np.asarray(axis, dtype=float)
        self.rho = float(rho)
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.span = float(span)
        self.length = self.span * np.sin(self.rho)

    @classmethod
    def from_start(cls, axis, rho, start_point, span):
        axis = np.asarray(axis, dtype=float)
        w = np.asarray(start_point, dtype=float) - np.cos(rho) * axis
        sin_rho = np.linalg.norm(w)
        if abs(sin_rho - np.sin(rho)) > 1e-9:
            raise ValueError("start point not on the circle")
        u = w / sin_rho
        v = np.cross(axis, u)
        return cls(axis, rho, u, v, span)

    def ccw_angle_to(self, point) -> float:
        """Counterclockwise angle from the start to a point on the circle."""
        w = np.asarray(point, dtype=float) - np.cos(self.rho) * self.axis
        phi = np.arctan2(w @ self.v, w @ self.u)
        return float(phi % (2.0 * np.pi))

    def point(self, s):
        s = np.asarray(s, dtype=float)
        phi = s / np.sin(self.rho)
        w = np.outer(np.cos(phi), self.u) + np.outer(np.sin(phi), self.v)
        return np.cos(self.rho) * self.axis + np.sin(self.rho) * w

    def transformed(self, mat) -> "CircleArc":
        return CircleArc(mat @ self.axis, self.rho, mat @ self.u, mat @ self.v, self.span)


class CurveSlice:
    """Arc-length parametrized slice of a series curve, optionally rotated."""

    N_TABLE = 4096

    def __init__(self, curve: PeriodicCurve, t0: float, t1: float, mat=None, ext: float = 0.05):
        self.curve = curve
        self.mat = np.eye(3) if mat is None else np.asarray(mat, dtype=float)
        span = t1 - t0
        m = max(512, int(self.N_TABLE * span)) + 1
        ts = np.linspace(t0 - ext * span, t1 + ext * span, int(m * (1 + 2 * ext)))
        speeds = np.linalg.norm(curve.derivative().eval(ts), axis=1)
        cum = np.concatenate([[0.0], np.cumsum((speeds[1:] + speeds[:-1]) / 2 * np.diff(ts))])
        s0 = np.interp(t0, ts, cum)
        self.length = float(np.interp(t1, ts, cum) - s0)
        self._param_of_s = PchipInterpolator(cum - s0, ts)

    def point(self, s):
        ts = self._param_of_s(np.asarray(s, dtype=float))
        return np.atleast_2d(self.curve.eval(ts)) @ self.mat.T

    def with_matrix(self, mat) -> "CurveSlice":
        """Same slice under a different isometry (tables are shared)."""
        other = object.__new__(CurveSlice)
        other.curve = self.curve
        other.mat = np.asarray(mat, dtype=float)
        other.length = self.length
        other._param_of_s = self._param_of_s
        return other


class PiecewiseCurve:
    """Closed concatenation of segments with a global arc-length parameter."""

    def __init__(self, segments):
        self.segments = [seg for seg in segments if seg.length > 1e-12]
        self.lengths = np.array([seg.length for seg in self.segments])
        self.breaks = np.concatenate([[0.0], np.cumsum(self.lengths)])
        self.total = float(self.breaks[-1])

    def sample(self, svals, blend_width: float = 0.0):
        """Points at global arc lengths, optionally blending corners.

        In a window of half-width blend_width around each junction the two
        adjacent segments (smoothly extended) are combined with a smooth
        low-overshoot step, which is a C1-small modification since the
        segments agree to first order at the junction.
        """
        svals = np.asarray(svals, dtype=float) % self.total
        idx = np.searchsorted(self.breaks, svals, side="right") - 1
        idx = np.clip(idx, 0, len(self.segments) - 1)
        pts = np.empty((svals.size, 3))
        for i, seg in enumerate(self.segments):
            mask = idx == i
            if np.any(mask):
                pts[mask] = seg.point(svals[mask] - self.breaks[i])
        if blend_width <= 0.0:
            return pts
        nseg = len(self.segments)
        for j in range(nseg):
            s_j = self.breaks[j]  # junction between segments j-1 and j
            left = self.segments[(j - 1) % nseg]
            right = self.segments[j]
            w = min(blend_width, 0.4 * left.length, 0.4 * right.length)
            if w <= 0.0:
                continue
            delta = (svals - s_j + self.total / 2) % self.total - self.total / 2
            mask = np.abs(delta) < w
            if not np.any(mask):
                continue
            d = delta[mask]
            p_left = left.point(left.length + d)
            p_right = right.point(d)
            sigma = _blend_weight(d / w)[:, None]
            pts[mask] = p_left + sigma * (p_right - p_left)
        return pts


# Blend weight with low curvature overshoot.
#
# For two arcs tangent at the junction, the blended curve's effective
# curvature is kappa_L + (kappa_R - kappa_L) * B(u) with B = (u^2 s / 2)''
# where s is the blend weight on u in [-1, 1]. Classic smoothsteps give B
# excursions of about +-0.3 outside [0, 1], which destroys convexity when a
# gentle arc meets a sharply curved one. Here B is prescribed directly: a
# narrow centered step plus two small side lobes whose amplitude is fixed by
# the exact moment conditions s(1) = 1, s'(1) = 0. The resulting overshoot
# is below 0.01. The weight s = 2h/u^2 is unbounded near u = 0, but it
# multiplies the O(u^2) gap between the arcs, so the blend stays tame.

_BLEND_MU = 0.3  # half-width of the central curvature step
_BLEND_D = 0.72  # side-lobe centers
_BLEND_WL = 0.25  # side-lobe half-width
_SIGMA2_P = 1.0 / 11.0  # second moment of the bump density below

_BLEND_ALPHA = None
_BLEND_A = None


@lru_cache(maxsize=1)
def _bump_g2_poly():
    """Exact third antiderivative (from -1) of (315/256)(1 - y^2)^4."""
    density = np.polynomial.Polynomial([315.0 / 256.0]) * np.polynomial.Polynomial([1, 0, -1]) ** 4
    g2 = density.integ(3, lbnd=-1.0)
    return g2


def _bump_third_antideriv(x, center, w):
    """Third antiderivative (from -1) of the C3 bump density at center/width.

    The density is (315/256)(1 - y^2)^4 / w in the scaled variable
    y = (x - center)/w; beyond the support it continues as the exact
    quadratic tail ((x - center)^2 + w^2/11)/2.
    """
    x = np.asarray(x, dtype=float)
    y = (x - center) / w
    inside = w * w * _bump_g2_poly()(np.clip(y, -1.0, 1.0))
    right = ((x - center) ** 2 + w * w * _SIGMA2_P) / 2.0
    out = np.where(y >= 1.0, right, inside)
    return np.where(y <= -1.0, 0.0, out)


def _blend_coefficients():
    global _BLEND_ALPHA, _BLEND_A
    if _BLEND_ALPHA is None:
        s2_main = _BLEND_MU**2 * _SIGMA2_P
        s2_lobe = _BLEND_D**2 + _BLEND_WL**2 * _SIGMA2_P
        # A - 2 alpha = 1 (total mass), A s2_main = 2 alpha s2_lobe (2nd moment)
        _BLEND_A = 1.0 / (1.0 - s2_main / s2_lobe)
        _BLEND_ALPHA = _BLEND_A * s2_main / (2.0 * s2_lobe)
    return _BLEND_A, _BLEND_ALPHA


def _blend_h(u):
    a, alpha = _blend_coefficients()
    return (
        a * _bump_third_antideriv(u, 0.0, _BLEND_MU)
        - alpha * _bump_third_antideriv(u, -_BLEND_D, _BLEND_WL)
        - alpha * _bump_third_antideriv(u, _BLEND_D, _BLEND_WL)
    )


def _blend_weight(u):
    u = np.asarray(u, dtype=float)
    u2 = np.maximum(u * u, 1e-10)
    return 2.0 * _blend_h(u) / u2


@dataclass
class SmoothingReport:
    margin: float
    max_deviation: float
    k_constant: float
    refit_residual: float
    refit_modes: int


def _fit_uniform(pts: np.ndarray, modes: int) -> PeriodicCurve:
    """Least-squares series fit on a uniform grid via the FFT."""
    n = pts.shape[0]
    fft = np.fft.rfft(pts, axis=0) / n
    a = np.zeros((modes + 1, pts.shape[1]))
    b = np.zeros((modes + 1, pts.shape[1]))
    a[0] = fft[0].real
    kmax = min(modes, fft.shape[0] - 1)
    a[1 : kmax + 1] = 2.0 * fft[1 : kmax + 1].real
    b[1 : kmax + 1] = -2.0 * fft[1 : kmax + 1].imag
    return PeriodicCurve(a=a, b=b)


def fit_uniform_adaptive(pts: np.ndarray, tol: float = 1e-7, max_modes: int = 1024):
    """Smallest truncation of the uniform-grid fit meeting the residual tol.

    Residuals of candidate truncations are evaluated spectrally (inverse FFT
    of the truncated spectrum), so the scan over mode counts is cheap.
    """
    n = pts.shape[0]
    fft = np.fft.rfft(pts, axis=0)
    max_modes = min(max_modes, (n - 1) // 2)

    def residual_at(modes):
        trunc = np.zeros_like(fft)
        trunc[: modes + 1] = fft[: modes + 1]
        model = np.fft.irfft(trunc, n=n, axis=0)
        return float(np.max(np.linalg.norm(model - pts, axis=1)))

    modes = 32
    while True:
        residual = residual_at(modes)
        if residual <= tol or modes >= max_modes:
            break
        modes = min(2 * modes, max_modes)
    if residual <= tol:
        # bisect down to (nearly) the smallest sufficient truncation
        lo, hi = modes // 2, modes
        while hi - lo > 16:
            mid = (lo + hi) // 2
            if residual_at(mid) <= tol:
                hi = mid
            else:
                lo = mid
        modes = hi
        residual = residual_at(modes)
    return _fit_uniform(pts, modes), residual


def smooth_corners(
    piecewise_curve,
    width: float = 0.02,
    samples: int = 8192,
    refit_tol: float = 1e-7,
    sphere_project: bool = True,
):
    """Blend corner neighbourhoods of a piecewise curve into a smooth series.

    width is a fraction of the total parameter length. Returns
    (PeriodicCurve, SmoothingReport); raises ConvexityLost when the blended
    curve loses spherical convexity.
    """
    if isinstance(piecewise_curve, PeriodicCurve):
        report = SmoothingReport(
            margin=convexity_margin(piecewise_curve).min_value,
            max_deviation=0.0, k_constant=0.0, refit_residual=0.0,
            refit_modes=piecewise_curve.modes,
        )
        return piecewise_curve, report
    pw = piecewise_curve
    svals = np.arange(samples) / samples * pw.total
    raw = pw.sample(svals)
    blended = pw.sample(svals, blend_width=width * pw.total)
    if sphere_project:
        blended = blended / np.linalg.norm(blended, axis=1)[:, None]
    deviation = float(np.max(np.linalg.norm(blended - raw, axis=1)))
    curve, residual = fit_uniform_adaptive(blended, tol=refit_tol)
    margin = convexity_margin(curve, samples=max(1024, 4 * curve.modes)).min_value
    if margin <= 0.0:
        raise ConvexityLost(f"convexity margin {margin:.3e} after smoothing")
    return curve, SmoothingReport(
        margin=margin,
        max_deviation=deviation,
        k_constant=deviation / width**2 if width > 0 else 0.0,
        refit_residual=residual,
        refit_modes=curve.modes,
    )


# ---------------------------------------------------------------------------
# Graftable arcs and the shipped seed


@dataclass(frozen=True)
class GraftableArc:
    """Parameters where the curve is tangent to latitude circles z = C0, C1."""

    t0: float
    t1: float
    C0: float
    C1: float

    def to_json(self) -> dict:
        return {"t0": self.t0, "t1": self.t1, "C0": self.C0, "C1": self.C1}


def check_graftable(curve: PeriodicCurve, arc: GraftableArc, tol: float = 1e-5):
    """Verify latitude tangency and convex-orientation matching at t0, t1."""
    if not (arc.C0 > 0.0 > arc.C1):
        raise NotGraftable("need C0 > 0 > C1")
    for t, level, sign in ((arc.t0, arc.C0, +1.0), (arc.t1, arc.C1, -1.0)):
        p = curve.eval(t)
        d = curve.derivative().eval(t)
        speed = np.linalg.norm(d)
        if abs(p[2] - level) > tol:
            raise NotGraftable(f"curve not on latitude z={level} at t={t}")
        if abs(d[2]) > 1e-3 * speed:
            raise NotGraftable(f"curve not tangent to latitude at t={t}")
        east = np.cross(Z_AXIS, p)
        if sign * (d @ east) <= 0.0:
            raise NotGraftable(f"orientation does not match convex latitude at t={t}")


@dataclass
class Seed:
    """The shipped graftable seed curve and its assembly data."""

    curve: PeriodicCurve
    arc: GraftableArc
    piecewise: PiecewiseCurve
    margin: float


def _connector(lat_exit: float, cap_radius: float, big_radius: float):
    """Convex descending connector: north cap loop, big circle, south cap loop.

    Leaves the northern latitude z=0.5 at longitude lat_exit heading east and
    arrives on z=-0.5 heading west at a longitude returned to the caller.
    All three circles are mutually tangent with matched orientations.
    """
    alpha = np.pi / 3  # polar angle of the latitude z = 0.5
    beta = alpha - cap_radius  # polar angle of the cap-loop center
    gap = big_radius - cap_radius  # center distance for internal tangency
    dlon = np.arccos(np.cos(gap) / np.sin(beta))  # longitude offset to the big circle

    def cap_center(lon, south=False):
        z = np.cos(beta)
        return np.array([np.sin(beta) * np.cos(lon), np.sin(beta) * np.sin(lon),
                         -z if south else z])

    c_north = cap_center(lat_exit)
    e_big = np.array([np.cos(lat_exit + dlon), np.sin(lat_exit + dlon), 0.0])
    lon_south = lat_exit + 2 * dlon
    c_south = cap_center(lon_south, south=True)

    def tangency(center_small):
        chat = center_small - (center_small @ e_big) * e_big
        chat /= np.linalg.norm(chat)
        return np.cos(big_radius) * e_big + np.sin(big_radius) * chat

    q1, q2 = tangency(c_north), tangency(c_south)
    p_top = np.array([np.sin(alpha) * np.cos(lat_exit), np.sin(alpha) * np.sin(lat_exit), 0.5])
    p_bot = np.array([np.sin(alpha) * np.cos(lon_south), np.sin(alpha) * np.sin(lon_south), -0.5])

    arcs = []
    a1 = CircleArc.from_start(c_north, cap_radius, p_top, span=0.0)
    a1.span = a1.ccw_angle_to(q1)
    a1.length = a1.span * np.sin(a1.rho)
    a2 = CircleArc.from_start(e_big, big_radius, q1, span=0.0)
    a2.span = a2.ccw_angle_to(q2)
    a2.length = a2.span * np.sin(a2.rho)
    a3 = CircleArc.from_start(c_south, cap_radius, q2, span=0.0)
    a3.span = a3.ccw_angle_to(p_bot)
    a3.length = a3.span * np.sin(a3.rho)
    arcs = [a1, a2, a3]
    return arcs, lon_south


@lru_cache(maxsize=1)
def build_seed(
    lat_span: float = 2.2,
    cap_radius: float = np.pi / 7,
    big_radius: float = 1.45,
    width: float = 0.04,
) -> Seed:
    """Construct the canonical convex seed tangent to z = +-0.5.

    The seed consists of an eastward arc of the latitude z=0.5, a convex
    connector descending to z=-0.5, a westward arc of that latitude, and the
    mirrored connector ascending back. Corners are blended and the result is
    refit as a series; convexity is verified numerically.
    """
    lat_rho = np.pi / 3

    # latitude arcs: CCW around +z (east, convex for z>0) and around -z (west)
    p_start_n = np.array([np.sin(lat_rho) * np.cos(-lat_span),
                          np.sin(lat_rho) * np.sin(-lat_span), 0.5])
    lat_n = CircleArc.from_start(Z_AXIS, lat_rho, p_start_n, span=lat_span)
    forward, lon_south = _connector(0.0, cap_radius, big_radius)

    p_bot = forward[-1].point(forward[-1].length)[0]
    lat_s = CircleArc.from_start(-Z_AXIS, lat_rho, p_bot, span=lat_span)

    # mirrored (ascending) connector: rotate by pi about the x axis, then
    # about z so it starts where the southern latitude arc ends
    flip = np.diag([1.0, -1.0, -1.0])
    end_s = lat_s.point(lat_s.length)[0]
    lon_end_s = np.arctan2(end_s[1], end_s[0])
    back = [a.transformed(rot_z(lon_end_s) @ flip) for a in forward]

    pw = PiecewiseCurve([lat_n] + forward + [lat_s] + back)
    curve, rep = smooth_corners(pw, width=width, samples=16384, refit_tol=1e-8)

    # graft parameters at the latitude arc midpoints, in the final parameter
    t0 = (lat_n.length / 2) / pw.total
    s_mid_s = pw.breaks[4] + lat_s.length / 2
    t1 = s_mid_s / pw.total
    arc = GraftableArc(t0=float(t0), t1=float(t1), C0=0.5, C1=-0.5)
    check_graftable(curve, arc)
    return Seed(curve=curve, arc=arc, piecewise=pw, margin=rep.margin)


def shipped_seed() -> tuple[PeriodicCurve, GraftableArc]:
    seed = build_seed()
    return seed.curve, seed.arc


# ---------------------------------------------------------------------------
# Grafting


def graft(
    curve: PeriodicCurve,
    arc: GraftableArc,
    n: int,
    s: float,
    width: float = 0.02,
    samples: int = 16384,
    refit_tol: float = 1e-7,
) -> PeriodicCurve:
    """Time-s curve of the n-grafting homotopy along a graftable arc.

    Cuts at t0 and t1, rotates the arc about the z axis by 2 pi n s, and
    reconnects along the latitude circles z = C0 (eastward) and z = C1
    (westward), smoothing the junctions. At s=1 the output carries an
    n-wiggle near each latitude.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    check_graftable(curve, arc)
    pw = _graft_piecewise(curve, arc, 2.0 * np.pi * n * s)
    out, _rep = smooth_corners(pw, width=width, samples=samples, refit_tol=refit_tol)
    return out


def _graft_piecewise(curve, arc, angle, slices=None) -> PiecewiseCurve:
    """Piecewise assembly of the grafted curve for a given rotation angle."""
    rot = rot_z(angle)
    rho0 = np.arccos(arc.C0)
    rho1 = np.pi - np.arccos(arc.C1)  # radius around -z for the southern latitude

    def on_latitude(p, level):
        r = np.sqrt(1.0 - level * level)
        q = np.array([p[0], p[1], 0.0])
        q *= r / np.linalg.norm(q)
        return np.array([q[0], q[1], level])

    p0 = on_latitude(curve.eval(arc.t0), arc.C0)
    p1 = on_latitude(curve.eval(arc.t1), arc.C1)
    if slices is None:
        slices = (CurveSlice(curve, arc.t1, arc.t0 + 1.0), CurveSlice(curve, arc.t0, arc.t1))
    complementary, grafted_arc = slices

    segments = [complementary]
    if angle > 1e-12:
        segments.append(CircleArc.from_start(Z_AXIS, rho0, p0, span=angle))
    segments.append(grafted_arc.with_matrix(rot))
    if angle > 1e-12:
        # from the rotated cut point back to p1, westward = CCW around -z
        segments.append(CircleArc.from_start(-Z_AXIS, rho1, rot @ p1, span=angle))
    return PiecewiseCurve(segments)


def graft_homotopy_margins(
    curve: PeriodicCurve,
    arc: GraftableArc,
    n: int,
    s_values,
    width: float = 0.02,
    samples: int = 4096,
) -> np.ndarray:
    """Convexity margins of the grafting homotopy at each s, without refits.

    Margins are finite-difference determinants det(gamma, gamma', gamma'') on
    dense samples of the blended piecewise curves, in the arc-length
    parameter; positivity certifies convexity along the homotopy.
    """
    check_graftable(curve, arc)
    slices = (CurveSlice(curve, arc.t1, arc.t0 + 1.0), CurveSlice(curve, arc.t0, arc.t1))
    margins = np.empty(len(s_values))
    for k, s in enumerate(s_values):
        pw = _graft_piecewise(curve, arc, 2.0 * np.pi * n * float(s), slices=slices)
        sv = np.arange(samples) / samples * pw.total
        pts = pw.sample(sv, blend_width=width * pw.total)
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        h = pw.total / samples
        d1 = (np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)) / (2 * h)
        d2 = (np.roll(pts, -1, axis=0) - 2 * pts + np.roll(pts, 1, axis=0)) / h**2
        margins[k] = float(np.min(np.linalg.det(np.stack([pts, d1, d2], axis=1))))
    return margins


# ---------------------------------------------------------------------------
# Wiggle detection


@dataclass
class WiggleRecord:
    """Maximal n-wiggle: n consecutive embedded convex loops of equal image."""

    a: float
    b: float
    multiplicity: int
    hemisphere: str

    @property
    def partition(self):
        return [self.a + i * (self.b - self.a) / self.multiplicity
                for i in range(self.multiplicity + 1)]

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "multiplicity": self.multiplicity,
                "hemisphere": self.hemisphere}


def _closest_params(curve, targets, t_guesses, iters=12):
    """Locally minimize |gamma(t) - target| over t, batched.

    Returns (t, distance) arrays for each target/guess pair.
    """
    d1 = curve.derivative()
    d2 = d1.derivative()
    targets = np.atleast_2d(targets)
    t = np.atleast_1d(np.asarray(t_guesses, dtype=float)).copy()
    for _ in range(iters):
        r = curve.eval(t) - targets
        v1 = d1.eval(t)
        g = 2.0 * np.sum(r * v1, axis=1)
        h = 2.0 * (np.sum(v1 * v1, axis=1) + np.sum(r * d2.eval(t), axis=1))
        step = np.where(h > 0.0, -g / np.where(h > 0.0, h, 1.0), 0.0)
        t += np.clip(step, -0.01, 0.01)
        if np.max(np.abs(step)) < 1e-14:
            break
    return t, np.linalg.norm(curve.eval(t) - targets, axis=1)


def _closest_param(curve, target, t_guess):
    t, d = _closest_params(curve, target, [t_guess])
    return float(t[0]), float(d[0])


def _loop_embedded(curve, a, b, tol, probes=96, fine=1024, exclusion=0.01):
    """True when the loop gamma|[a,b] has no non-local self-approach below tol.

    Probe points are projected onto the rest of the loop (Newton), excluding
    a parameter window around each probe, so overlapping branches are caught
    even though samples never coincide exactly.
    """
    span = b - a
    tf = a + span * np.arange(fine) / fine
    pf = curve.eval(tf)
    stride = max(1, fine // probes)
    ti = tf[::stride]
    pi = pf[::stride]
    dist = cdist(pi, pf)
    gap = np.abs(ti[:, None] - tf[None, :])
    gap = np.minimum(gap, span - gap)
    dist[gap <= max(exclusion, 3.0 * span / fine)] = np.inf
    j = np.argmin(dist, axis=1)
    t_proj, dmin = _closest_params(curve, pi, tf[j])
    # ignore projections that drifted back into the probe's own neighbourhood
    drift = np.abs(t_proj - ti)
    drift = np.minimum(drift, span - drift)
    dmin = np.where(drift <= exclusion / 2.0, np.min(dist, axis=1), dmin)
    return float(np.min(dmin)) > tol


def _arc_hausdorff(curve, a0, b0, a1, b1, samples=120):
    p = curve.eval(a0 + (b0 - a0) * np.arange(samples) / samples)
    q = curve.eval(a1 + (b1 - a1) * np.arange(samples) / samples)
    d = cdist(p, q)
    return float(max(d.min(axis=0).max(), d.min(axis=1).max()))


def detect_wiggles(
    curve: PeriodicCurve,
    tol: float = 1e-6,
    image_tol: float = 1e-5,
    grid: int = 256,
    min_period: float = 0.02,
) -> list[WiggleRecord]:
    """Find maximal n-wiggles of a convex curve.

    For grid starts a, the smallest return time T with gamma(a+T) = gamma(a)
    and aligned tangents is estimated from dense samples. Contiguous starts
    with matching return times form a family; per family the earliest start
    is Newton-polished, the loop is checked for embeddedness, and consecutive
    loops with Hausdorff-equal images are chained into an n-wiggle.
    """
    dense = 2048
    ts = np.arange(dense) / dense
    pts = curve.eval(ts)
    tangents = curve.derivative().eval(ts)
    tangents /= np.linalg.norm(tangents, axis=1)[:, None]

    # coarse gate: must admit the nearest grid sample on an overlapping branch
    mean_speed = float(np.mean(np.linalg.norm(curve.derivative().eval(ts), axis=1)))
    coarse_tol = max(50.0 * tol, 3.0 * mean_speed / dense)

    # rough return time per grid start (vectorized over the dense samples)
    step = dense // grid
    rough: list[tuple[float, float]] = []  # (a, T_rough); T=1 means plain closure
    for i in range(0, dense, step):
        a = ts[i]
        d = np.linalg.norm(pts - pts[i], axis=1)
        align = tangents @ tangents[i]
        dt = (ts - a) % 1.0
        mask = (d < coarse_tol) & (align > 0.995) & (dt > min_period)
        cand = np.where(mask)[0]
        if cand.size == 0:
            rough.append((a, 1.0))
            continue
        clusters = np.split(cand, np.where(np.diff(cand) > 2)[0] + 1)
        T_best = min((ts[c[np.argmin(d[c])]] - a) % 1.0 for c in clusters)
        # a cluster just behind the start is the trivial full-period closure
        rough.append((a, 1.0 if T_best > 1.0 - min_period else T_best))

    # group contiguous starts with consistent return times into families
    families: list[list[tuple[float, float]]] = []
    for a, T in rough:
        if families and a - families[-1][-1][0] <= 2.5 * step / dense \
                and abs(T - families[-1][-1][1]) < 0.05 * max(T, families[-1][-1][1]):
            families[-1].append((a, T))
        else:
            families.append([(a, T)])
    if len(families) > 1 and abs(families[0][0][1] - families[-1][-1][1]) \
            < 0.05 * families[0][0][1]:
        families[-1].extend([(a + 1.0, T) for a, T in families[0]])
        families.pop(0)

    records: list[WiggleRecord] = []
    full_period_done = False
    for family in families:
        a, T_rough = family[0]
        if T_rough >= 1.0 - min_period:
            # plain closure of the whole curve: the same loop for every
            # start, so it only needs to be examined once
            if not full_period_done:
                full_period_done = True
                if _loop_embedded(curve, a, a + 1.0, tol):
                    records.append(WiggleRecord(a=a % 1.0, b=a % 1.0 + 1.0, multiplicity=1,
                                                hemisphere=_hemisphere(curve, a, a + 1.0)))
            continue
        # starts at the family edge can have their far end in a junction
        # blend zone; walk inward until a clean loop is found
        found = False
        embed_budget = 3
        for a, T_rough in family[: min(len(family), 12)]:
            t_ret, dist = _closest_param(curve, curve.eval(a), a + T_rough)
            T = (t_ret - a) % 1.0
            if dist > tol or T <= min_period:
                continue
            if _loop_embedded(curve, a, a + T, tol):
                found = True
                break
            embed_budget -= 1
            if embed_budget == 0:
                break
        if not found:
            continue
        # chain consecutive loops of the same image (cap at one full turn)
        mult = 1
        while (mult + 1) * T <= 1.0 + 1e-9:
            b0, b1 = a + mult * T, a + (mult + 1) * T
            if np.linalg.norm(curve.eval(b0) - curve.eval(a)) > coarse_tol:
                break
            if _arc_hausdorff(curve, a, a + T, b0, b1) > image_tol:
                break
            mult += 1
        records.append(WiggleRecord(a=a % 1.0, b=a % 1.0 + mult * T, multiplicity=mult,
                                    hemisphere=_hemisphere(curve, a, a + T)))

    return _dedup(records)


def _hemisphere(curve, a, b, samples=64) -> str:
    z = curve.eval(a + (b - a) * np.arange(samples) / samples)[:, 2]
    mean = float(np.mean(z))
    if mean > 0.2:
        return "north"
    if mean < -0.2:
        return "south"
    return "other"


def _dedup(records: list[WiggleRecord]) -> list[WiggleRecord]:
    """Keep, per overlapping family, the record with the most loops."""
    records = sorted(records, key=lambda r: (-r.multiplicity, r.a))
    kept: list[WiggleRecord] = []
    for rec in records:
        T = (rec.b - rec.a) / rec.multiplicity
        duplicate = False
        for other in kept:
            T2 = (other.b - other.a) / other.multiplicity
            overlap = _interval_overlap(rec.a, rec.b, other.a, other.b)
            if overlap > 0.5 * min(T, T2) and abs(T - T2) < 0.25 * min(T, T2):
                duplicate = True
                break
        if not duplicate:
            kept.append(rec)
    kept.sort(key=lambda r: r.a)
    return kept


def _interval_overlap(a0, b0, a1, b1) -> float:
    """Overlap length of two parameter intervals on the circle."""
    total = 0.0
    for shift in (-1.0, 0.0, 1.0):
        lo = max(a0 + shift, a1)
        hi = min(b0 + shift, b1)
        total += max(0.0, hi - lo)
    return min(total, b0 - a0, b1 - a1)


def n_complete_surround_check(curve: PeriodicCurve, n: int, tol: float = 1e-6):
    """Two disjoint n-wiggles whose union strictly surrounds the origin.

    Returns (ok, margin): margin is the surround margin restricted to the
    two wiggle arcs (NaN when no such pair of wiggles exists).
    """
    records = [r for r in detect_wiggles(curve, tol=tol) if r.multiplicity >= n]
    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            r0, r1 = records[i], records[j]
            if _interval_overlap(r0.a, r0.b, r1.a, r1.b) > 1e-9:
                continue
            pts = np.vstack([
                curve.eval(r0.a + (r0.b - r0.a) * np.arange(256) / 256),
                curve.eval(r1.a + (r1.b - r1.a) * np.arange(256) / 256),
            ])
            margin = surround_margin(pts)
            if margin > 0.0:
                return True, margin
    return False, float("nan")
