"""Zero-integral reparametrization of strictly surrounding spherical curves.

A curve that strictly surrounds the origin admits a circle diffeomorphism
psi with integral of gamma(psi(t)) equal to zero. The diffeomorphism is
produced by exponential tilting: minimizing Lambda(u) = log int exp(u .
gamma) makes the tilted mean vanish, and the tilted density is the
derivative of the cumulative map whose inverse is psi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import PeriodicCurve, surround_margin
from .errors import Degenerate, NotSurrounding, RefitResidual
from .surgery import fit_uniform_adaptive


@dataclass
class TiltSolution:
    """Witness of the tilt solve: minimizer of the log-partition function."""

    u: np.ndarray
    residual: float
    iterations: int
    hessian_min_eig: float
    trace: list = field(default_factory=list)  # residual norm per iteration

    def to_json(self) -> dict:
        return {
            "u": self.u.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "hessian_min_eig": self.hessian_min_eig,
            "trace": list(self.trace),
        }


def tilt_solve(
    curve: PeriodicCurve,
    tol: float = 1e-12,
    max_iter: int = 40,
    samples: int | None = None,
) -> TiltSolution:
    """Minimize Lambda(u) = log int_0^1 exp(u . gamma(t)) dt by damped Newton.

    The gradient of Lambda is the tilted mean of gamma and the Hessian its
    tilted covariance, so the solve drives the tilted mean below tol. Strict
    surrounding of the origin (checked) makes Lambda coercive, hence a
    minimizer exists.
    """
    # margins below numerical noise (e.g. a great circle's exact 0) cannot
    # certify strictness, and the solve would be degenerate there anyway
    if surround_margin(curve) <= 1e-9:
        raise NotSurrounding("curve does not strictly surround the origin")
    n = samples or max(512, 4 * (curve.modes + 1))
    pts = curve.eval(np.arange(n) / n)

    def state(u):
        h = pts @ u
        hmax = h.max()
        w = np.exp(h - hmax)
        z = w.sum()
        mean = (w @ pts) / z
        centered = pts - mean
        cov = (centered * w[:, None]).T @ centered / z
        value = np.log(z / n) + hmax
        return value, mean, cov

    u = np.zeros(curve.dim)
    value, grad, hess = state(u)
    eig_min = float(np.linalg.eigvalsh(hess)[0])
    iterations = 0
    trace = [float(np.linalg.norm(grad))]
    while np.linalg.norm(grad) > tol and iterations < max_iter:
        if eig_min < 1e-12:
            raise Degenerate(f"tilted covariance nearly singular (eig {eig_min:.3e})")
        step = -np.linalg.solve(hess, grad)
        lam = 1.0
        while lam > 1e-8:
            candidate = u + lam * step
            new_value, new_grad, new_hess = state(candidate)
            if new_value <= value + 1e-4 * lam * (grad @ step):
                break
            # near the optimum the value decrease underflows in floating
            # point; accept any step that contracts the gradient instead
            if np.linalg.norm(new_grad) <= 0.5 * np.linalg.norm(grad):
                break
            lam /= 2.0
        u, value, grad, hess = candidate, new_value, new_grad, new_hess
        eig_min = float(np.linalg.eigvalsh(hess)[0])
        iterations += 1
        trace.append(float(np.linalg.norm(grad)))
    residual = float(np.linalg.norm(grad))
    if residual > tol:
        raise Degenerate(f"tilt solve stalled at residual {residual:.3e}")
    return TiltSolution(u=u, residual=residual, iterations=iterations,
                        hessian_min_eig=eig_min, trace=trace)


@dataclass
class CircleDiffeo:
    """Circle diffeomorphism psi stored through its positive density.

    The cumulative map is Psi(s) = int_0^s w with w a strictly positive
    scalar series of unit mass, and psi = Psi^{-1}.
    """

    density: PeriodicCurve  # scalar series (dim 1), mean 1, positive

    def __post_init__(self):
        self._periodic_part = self.density.antiderivative()

    @staticmethod
    def identity() -> "CircleDiffeo":
        return CircleDiffeo(density=PeriodicCurve.constant([1.0]))

    def density_at(self, s):
        return np.atleast_2d(self.density.eval(s))[:, 0]

    def cumulative(self, s):
        """Psi(s): the linear part from the unit mean plus a periodic part."""
        s = np.asarray(s, dtype=float)
        mean = self.density.a[0, 0]
        return mean * s + np.atleast_2d(self._periodic_part.eval(s))[:, 0]

    def inverse(self, t, tol: float = 1e-12, max_iter: int = 60):
        """psi(t): solve Psi(s) = t by guarded Newton on the monotone map."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        base = np.floor(t)
        frac = t - base
        lo = np.zeros_like(frac)
        hi = np.ones_like(frac)
        s = frac.copy()
        for _ in range(max_iter):
            f = self.cumulative(s) - frac
            lo = np.where(f < 0.0, s, lo)
            hi = np.where(f > 0.0, s, hi)
            step = f / self.density_at(s)
            s_new = s - step
            bad = (s_new <= lo) | (s_new >= hi)
            s_new = np.where(bad, (lo + hi) / 2.0, s_new)
            if np.max(np.abs(s_new - s)) < tol and np.max(np.abs(f)) < tol:
                s = s_new
                break
            s = s_new
        return s + base

    def __call__(self, t):
        return self.inverse(t)

    def to_json(self) -> dict:
        return {"density": self.density.to_json()}

    @staticmethod
    def from_json(obj: dict) -> "CircleDiffeo":
        return CircleDiffeo(density=PeriodicCurve.from_json(obj["density"]))


def _density_from_tilt(curve: PeriodicCurve, u: np.ndarray, samples: int,
                       fit_tol: float = 1e-11) -> PeriodicCurve:
    grid = np.arange(samples) / samples
    h = curve.eval(grid) @ u
    w = np.exp(h - h.max())
    w /= w.mean()
    series, residual = fit_uniform_adaptive(w[:, None], tol=fit_tol)
    if residual > 100 * fit_tol:
        raise RefitResidual(f"density refit residual {residual:.3e}")
    dens_min = float(np.min(series.eval(grid)))
    if dens_min <= 0.0:
        raise Degenerate(f"reparametrization density not positive ({dens_min:.3e})")
    return series


def _rebalance_with_u(curve: PeriodicCurve, u: np.ndarray, samples: int,
                      refit_tol: float):
    diffeo = CircleDiffeo(density=_density_from_tilt(curve, u, samples))
    grid = np.arange(samples) / samples
    vals = curve.eval(diffeo.inverse(grid))
    out, residual = fit_uniform_adaptive(vals, tol=refit_tol)
    if residual > refit_tol:
        raise RefitResidual(f"reparametrized refit residual {residual:.3e}")
    # the constant term is the sample mean of a smooth periodic map whose
    # integral vanishes at the tilt optimum; zero it exactly (a shift far
    # below the refit tolerance)
    a = out.a.copy()
    a[0] = 0.0
    return PeriodicCurve(a=a, b=out.b), diffeo


def rebalance(
    curve: PeriodicCurve,
    tol: float = 1e-10,
    refit_tol: float = 1e-7,
    samples: int | None = None,
):
    """Reparametrize a strictly surrounding curve to zero integral.

    Returns (gamma o psi as a series, psi). The output is a pure
    reparametrization: same image, same orientation, zero integral.
    """
    n = samples or max(2048, 8 * (curve.modes + 1))
    sol = tilt_solve(curve, tol=tol)
    return _rebalance_with_u(curve, sol.u, n, refit_tol)


def family_rebalance(family, frozen_region=None, tol: float = 1e-10,
                     collar_width: float = 2.0, refit_tol: float = 1e-7):
    """Fiberwise rebalance, interpolated to the identity over frozen nodes.

    The interpolation acts on the tilt vector, u -> rho * u with rho a
    smooth profile of the grid distance to the frozen region (0 on it, 1
    beyond the collar), so every intermediate density stays positive.
    Returns a family of the same type plus the per-node integral norms.
    """
    curves = family.node_curves
    shape = family.grid_shape
    if frozen_region is None:
        frozen = np.zeros(shape, dtype=bool)
    else:
        frozen = np.asarray(frozen_region, dtype=bool).reshape(shape)

    rho = _collar_profile(frozen, family.periodic, collar_width)
    flat_rho = rho.reshape(-1)
    out = []
    integrals = np.empty(len(curves))
    for idx, curve in enumerate(curves):
        r = flat_rho[idx]
        if r == 0.0:
            out.append(curve)
            integrals[idx] = float(np.linalg.norm(curve.a[0]))
            continue
        sol = tilt_solve(curve, tol=1e-12)
        n = max(2048, 8 * (curve.modes + 1))
        new_curve, _diffeo = _rebalance_with_u(curve, r * sol.u, n, refit_tol)
        if r < 1.0:
            # inside the collar the integral is only reduced, not cancelled
            grid = np.arange(n) / n
            resampled = curve.eval(CircleDiffeo(
                density=_density_from_tilt(curve, r * sol.u, n)).inverse(grid))
            integrals[idx] = float(np.linalg.norm(resampled.mean(axis=0)))
            a = new_curve.a.copy()
            a[0] = resampled.mean(axis=0)
            new_curve = PeriodicCurve(a=a, b=new_curve.b)
        else:
            integrals[idx] = float(np.linalg.norm(new_curve.a[0]))
        out.append(new_curve)
    return family.with_node_curves(out), integrals.reshape(shape)


def _collar_profile(frozen: np.ndarray, periodic: bool, width: float) -> np.ndarray:
    """Smooth 0-to-1 profile of grid distance from the frozen region."""
    if not np.any(frozen):
        return np.ones(frozen.shape)
    from scipy.ndimage import distance_transform_edt

    if periodic:
        tiled = np.tile(frozen, (3,) * frozen.ndim)
        dist = distance_transform_edt(~tiled)
        sl = tuple(slice(s, 2 * s) for s in frozen.shape)
        dist = dist[sl]
    else:
        dist = distance_transform_edt(~frozen)
    x = np.clip(dist / width, 0.0, 1.0)
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
