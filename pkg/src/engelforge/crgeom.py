"""Embeddings of chart x S^1 into C^3 and their complex tangencies.

Points of R^6 are identified with C^3 through interleaved coordinates
(x1, y1, x2, y2, x3, y3), z_k = x_k + i y_k.  Two embedding models are
provided: the flat model (x, lambda * nu(x, t)) with y = lambda * nu, and
the Clifford tubular model ((1 - y_k) e^{i theta_k}) with theta = 2 pi x.
The complex tangency at a sample is T ^ J(T), computed from the nullspace
of the assembled system [J B | -B] with B the tangent basis; co-reality
means the tangency is a plane (real dimension 2) everywhere, and the
certified plane field feeds the rank-filtration certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import PeriodicCurve
from .errors import (
    AlignmentFailure,
    ModelMismatch,
    NearSingularA,
    OutOfTube,
    RankDeficient,
)
from .prolong import (
    BundleImmersionFamily,
    PlaneField,
    SplineGrid,
    derived_prolongation,
    family_values,
    fibrewise_integrate,
    rotation_field_family,
)
from .engel import EngelCertificate, engel_margins

J_STD = np.zeros((6, 6))
for _k in range(3):
    J_STD[2 * _k, 2 * _k + 1] = -1.0
    J_STD[2 * _k + 1, 2 * _k] = 1.0


@dataclass
class ACSField:
    """Almost complex structure J(p) as a 6x6 matrix field on R^6."""

    matrix: callable  # (N, 6) -> (N, 6, 6)
    tag: str = "standard"

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.matrix(pts)

    @staticmethod
    def standard() -> "ACSField":
        return ACSField(
            matrix=lambda p: np.broadcast_to(
                J_STD, (len(np.atleast_2d(p)), 6, 6)
            ).copy(),
            tag="standard",
        )


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


def perturbed_J(
    amplitude: float,
    rng: np.random.Generator | None = None,
    generator: np.ndarray | None = None,
    width: float = 0.5,
) -> ACSField:
    """Conjugated structure J = A J_std A^{-1}, A = Id + bump(p) E.

    The bump is a smooth function of the fiber coordinates (y1, y2, y3)
    vanishing on the zero section {y = 0}, so the field is splitting-adapted
    and equals J_std there; E is a fixed random direction unless supplied.
    J^2 = -Id holds identically by conjugation.  NearSingularA is raised if
    det A drops below 0.5 at an evaluated point.
    """
    if not 0.0 <= amplitude < 0.5:
        raise ValueError("amplitude must lie in [0, 0.5)")
    if generator is None:
        if rng is None:
            rng = np.random.default_rng(0)
        generator = rng.normal(size=(6, 6))
        generator /= np.linalg.norm(generator, 2)
    e = np.asarray(generator, dtype=float)

    def matrix(pts):
        y = pts[:, 1::2]
        bump = amplitude * _smoothstep(np.sum(y * y, axis=1) / width**2)
        a = np.broadcast_to(np.eye(6), (len(pts), 6, 6)) + bump[:, None, None] * e
        det = np.linalg.det(a)
        if float(np.min(det)) < 0.5:
            raise NearSingularA(f"det A = {float(np.min(det)):.3f} < 0.5")
        return a @ J_STD @ np.linalg.inv(a)

    return ACSField(matrix=matrix, tag="conjugated")


# ---------------------------------------------------------------------------
# Ambient embeddings


@dataclass
class AmbientEmbedding:
    """Map G: (x, t) -> R^6 = C^3 with first-derivative jets on a grid.

    model "flat": G = (x1, lam*nu1, x2, lam*nu2, x3, lam*nu3);
    model "clifford": G_k = (1 - lam*nu_k) e^{2 pi i x_k} (tubular chart of
    the unit 3-torus; requires |lam * nu| < 1 componentwise).
    """

    family: BundleImmersionFamily
    model: str = "flat"
    lam: float = 1.0

    def __post_init__(self):
        if self.model not in ("flat", "clifford"):
            raise ModelMismatch(f"unknown model {self.model!r}")
        if self.lam <= 0.0:
            raise ValueError("fiber dilation lambda must be positive")

    def grid_maps(self, fiber_samples: int):
        """(G, dG) on the family grid x fiber grid.

        G has shape grid + (nt, 6); dG appends the domain direction
        (x1, x2, x3, t) as a final axis of length 4.
        """
        fam = self.family
        shape = fam.grid_shape
        tgrid = np.arange(fiber_samples) / fiber_samples
        nu = family_values(fam, tgrid).reshape(shape + (fiber_samples, 3))
        nu_dot = family_values(fam, tgrid, derivative=1).reshape(
            shape + (fiber_samples, 3)
        )
        sp = SplineGrid(nu, (fam.periodic,) * 3)
        dnu = np.stack(
            [
                sp.at_nodes((1, 0, 0)),
                sp.at_nodes((0, 1, 0)),
                sp.at_nodes((0, 0, 1)),
            ],
            axis=-1,
        )  # shape + (nt, 3, 3): component k, base direction i
        xs = fam.node_grid().reshape(shape + (3,))
        x = np.broadcast_to(xs[..., None, :], shape + (fiber_samples, 3))
        y = self.lam * nu
        dy = np.zeros(shape + (fiber_samples, 3, 4))
        dy[..., :3] = self.lam * dnu
        dy[..., 3] = self.lam * nu_dot

        g = np.empty(shape + (fiber_samples, 6))
        dg = np.zeros(shape + (fiber_samples, 6, 4))
        if self.model == "flat":
            g[..., 0::2] = x
            g[..., 1::2] = y
            for i in range(3):
                dg[..., 2 * i, i] = 1.0
            dg[..., 1::2, :] = dy
        else:
            if float(np.max(np.abs(y))) >= 1.0:
                raise OutOfTube(
                    f"fiber coordinate reaches {float(np.max(np.abs(y))):.3f}"
                )
            theta = 2.0 * np.pi * x
            c, s = np.cos(theta), np.sin(theta)
            r = 1.0 - y
            g[..., 0::2] = r * c
            g[..., 1::2] = r * s
            for i in range(3):
                dg[..., 2 * i, i] = -2.0 * np.pi * r[..., i] * s[..., i]
                dg[..., 2 * i + 1, i] = 2.0 * np.pi * r[..., i] * c[..., i]
            dg[..., 0::2, :] -= c[..., None] * dy
            dg[..., 1::2, :] -= s[..., None] * dy
        return g, dg


def clifford_tubular(theta, y) -> np.ndarray:
    """Tubular chart ((1 - y_k) e^{i theta_k}) of the unit 3-torus in C^3."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.max(np.abs(y)) >= 1.0:
        raise OutOfTube(f"|y| reaches {float(np.max(np.abs(y))):.3f} >= 1")
    out = np.empty(theta.shape[:-1] + (6,)) if theta.ndim > 1 else np.empty(6)
    r = 1.0 - y
    out[..., 0::2] = r * np.cos(theta)
    out[..., 1::2] = r * np.sin(theta)
    return out


# ---------------------------------------------------------------------------
# Complex tangencies


def _tangency_svd(j_mats, b_mats):
    """Batched SVD of the assembled system [J B | -B], (N, 6, 8)."""
    system = np.concatenate([j_mats @ b_mats, -b_mats], axis=-1)
    return np.linalg.svd(system, full_matrices=True)


def _rank_split(s, rel_tol=1e-8):
    """(ranks, gaps): rank decisions per sample with the separating gap."""
    smax = s[..., 0]
    keep = s > rel_tol * smax[..., None]
    ranks = keep.sum(axis=-1)
    # separating gap: smallest kept / largest dropped (inf when full rank)
    n = s.shape[-1]
    idx = np.clip(ranks - 1, 0, n - 1)
    kept = np.take_along_axis(s, idx[..., None], axis=-1)[..., 0]
    dropped = np.where(
        ranks < n,
        np.take_along_axis(s, np.clip(ranks, 0, n - 1)[..., None], axis=-1)[..., 0],
        0.0,
    )
    with np.errstate(divide="ignore"):
        gaps = np.where(dropped > 0.0, kept / np.maximum(dropped, 1e-300), np.inf)
    return ranks, gaps


def complex_tangency(j_mat: np.ndarray, b_mat: np.ndarray, rel_tol: float = 1e-8):
    """(real dimension, orthonormal domain basis or None) at one sample.

    ``b_mat`` is the 6x4 matrix of tangent basis vectors (columns dG of the
    embedding); the solution space of J B a = B b over (a, b) is computed by
    a rank-revealing SVD of [J B | -B], and when the tangency is a plane the
    basis is pulled back through the tangent map (span of the a-parts).
    """
    if np.linalg.matrix_rank(b_mat, tol=1e-10) < 4:
        raise RankDeficient("embedding differential has rank < 4")
    u, s, vt = np.linalg.svd(np.concatenate([j_mat @ b_mat, -b_mat], axis=-1))
    rank = int(np.sum(s > rel_tol * s[0]))
    dim = 8 - rank
    if dim != 2:
        return dim, None
    null = vt[rank:, :4]  # a-parts of the nullspace vectors
    q, _ = np.linalg.qr(null.T)
    return dim, q


@dataclass
class TangencyReport:
    """Per-sample complex tangency dimensions over an embedding grid."""

    grid_shape: tuple
    fiber_samples: int
    dims: np.ndarray
    co_real: bool
    min_gap: float
    planes: np.ndarray | None = None  # (grid..., nt, 4, 2) when co-real

    def to_json(self) -> dict:
        values, counts = np.unique(self.dims, return_counts=True)
        return {
            "grid_shape": list(self.grid_shape),
            "fiber_samples": self.fiber_samples,
            "dimension_histogram": {
                str(int(v)): int(c) for v, c in zip(values, counts)
            },
            "co_real": self.co_real,
            "min_gap": self.min_gap,
        }


def coreal_scan(
    embedding: AmbientEmbedding,
    j_field: ACSField,
    fiber_samples: int = 64,
    rel_tol: float = 1e-8,
    keep_planes: bool = True,
) -> TangencyReport:
    """Tangency dimension at every sample; co-real iff the dimension is 2.

    The reported gap is the ratio of the smallest kept to largest dropped
    singular value at the rank decision (conditioning of co-reality).
    """
    g, dg = embedding.grid_maps(fiber_samples)
    shape = g.shape[:-1]
    flat_g = g.reshape(-1, 6)
    flat_b = dg.reshape(-1, 6, 4)
    sv_b = np.linalg.svd(flat_b, compute_uv=False)
    if float(sv_b[:, 3].min()) <= 1e-10 * float(sv_b[:, 0].max()):
        raise RankDeficient("embedding differential drops rank on the grid")
    j_mats = j_field.at(flat_g)
    u, s, vt = _tangency_svd(j_mats, flat_b)
    ranks, gaps = _rank_split(s, rel_tol)
    dims = (8 - ranks).reshape(shape)
    co_real = bool(np.all(dims == 2))
    planes = None
    if co_real and keep_planes:
        null = vt[:, 6:, :4]  # rows 6,7 of V^T: a-parts of the 2 null vectors
        q, _ = np.linalg.qr(np.swapaxes(null, -2, -1))
        planes = q.reshape(shape + (4, 2))
    return TangencyReport(
        grid_shape=tuple(shape[:3]),
        fiber_samples=fiber_samples,
        dims=dims,
        co_real=co_real,
        min_gap=float(gaps.min()),
        planes=planes,
    )


def principal_angles(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Principal angles between planes with orthonormal bases (..., k, 2).

    Sine-based: the singular values of (I - P1) Q2 are exactly the sines of
    the principal angles, which keeps full precision for near-equal planes
    (the cosine formula bottoms out at sqrt(machine eps)).
    """
    residual = q2 - q1 @ (np.swapaxes(q1, -2, -1) @ q2)
    sines = np.linalg.svd(residual, compute_uv=False)
    return np.arcsin(np.clip(sines, 0.0, 1.0))


def _reference_planes(reference: PlaneField) -> np.ndarray:
    """Orthonormal bases of a plane field's frames, shape (..., 4, 2)."""
    frames = np.swapaxes(reference.frames, -2, -1)  # (..., 4, 2)
    q, _ = np.linalg.qr(frames)
    return q


def lemma_check(
    embedding: AmbientEmbedding,
    fiber_samples: int = 64,
    rel_tol: float = 1e-8,
) -> float:
    """Max principal angle between D_J_std and the derived prolongation.

    Requires the flat model with a base-independent family and standard J;
    ModelMismatch otherwise.  For such data the two plane fields agree for
    every fiber dilation, so the return value measures numerical error only.
    """
    if embedding.model != "flat":
        raise ModelMismatch("lemma check requires the flat model")
    coefs = [(c.a, c.b) for c in embedding.family.node_curves]
    a0, b0 = coefs[0]
    for a, b in coefs[1:]:
        if a.shape != a0.shape or not (
            np.array_equal(a, a0) and np.array_equal(b, b0)
        ):
            raise ModelMismatch("family is not base-independent")
    report = coreal_scan(
        embedding, ACSField.standard(), fiber_samples, rel_tol, keep_planes=True
    )
    if not report.co_real:
        raise ModelMismatch("tangency is not co-real on the grid")
    reference = derived_prolongation(embedding.family, fiber_samples)
    angles = principal_angles(report.planes, _reference_planes(reference))
    return float(angles.max())


def tangency_frame_field(
    embedding: AmbientEmbedding,
    j_field: ACSField,
    reference: PlaneField,
    fiber_samples: int | None = None,
    max_angle: float = np.pi / 4,
    report: TangencyReport | None = None,
) -> PlaneField:
    """Frame the complex tangencies by projecting a reference plane field.

    The reference frame vectors are orthogonally projected onto the computed
    tangency plane at every sample and re-orthonormalized, giving a frame
    field continuous across the grid (the projector is basis-independent).
    AlignmentFailure when some principal angle to the reference reaches
    ``max_angle`` (the fiber dilation is too large for this reference).
    """
    if fiber_samples is None:
        fiber_samples = reference.fiber_samples
    if report is None or report.planes is None:
        report = coreal_scan(embedding, j_field, fiber_samples, keep_planes=True)
    if not report.co_real:
        raise AlignmentFailure("tangency is not a plane distribution")
    planes = report.planes
    angles = principal_angles(planes, _reference_planes(reference))
    worst = float(angles.max())
    if worst >= max_angle:
        raise AlignmentFailure(
            f"principal angle {worst:.3f} rad exceeds {max_angle:.3f}"
        )
    proj = planes @ np.swapaxes(planes, -2, -1)  # (..., 4, 4)
    ref = np.swapaxes(reference.frames, -2, -1)  # (..., 4, 2)
    projected = proj @ ref
    f1 = projected[..., 0]
    f1 = f1 / np.linalg.norm(f1, axis=-1, keepdims=True)
    f2 = projected[..., 1]
    f2 = f2 - np.sum(f1 * f2, axis=-1, keepdims=True) * f1
    f2 = f2 / np.linalg.norm(f2, axis=-1, keepdims=True)
    frames = np.stack([f1, f2], axis=-2)
    return PlaneField(frames, periodic=reference.periodic)


# ---------------------------------------------------------------------------
# The zoom sweep


@dataclass
class ZoomStep:
    lam: float
    co_real: bool
    min_gap: float
    certificate: EngelCertificate | None
    error: str | None = None

    @property
    def passed(self) -> bool:
        return (
            self.error is None
            and self.co_real
            and self.certificate is not None
            and self.certificate.engel
        )

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "co_real": self.co_real,
            "min_gap": self.min_gap,
            "certificate": None
            if self.certificate is None
            else self.certificate.to_json(),
            "error": self.error,
            "passed": self.passed,
        }


@dataclass
class ZoomSweepResult:
    steps: list
    lambda_star: float | None
    limit_certificate: EngelCertificate

    def to_json(self) -> dict:
        return {
            "steps": [s.to_json() for s in self.steps],
            "lambda_star": self.lambda_star,
            "limit_min_m4": self.limit_certificate.min_m4,
        }


def zoom_family(
    fiber_curve: PeriodicCurve,
    lam: float,
    grid_shape=(8, 8, 8),
    amplitude: float = 0.2,
) -> BundleImmersionFamily:
    """Fibrewise primitives of the zoomed rotation-field family gamma(lam*x, t)."""
    gamma = rotation_field_family(
        fiber_curve, grid_shape, amplitude, zoom=lam, periodic=False
    )
    return fibrewise_integrate(gamma)


def zoom_sweep(
    fiber_curve: PeriodicCurve,
    model: str,
    j_field: ACSField,
    lambdas,
    grid_shape=(8, 8, 8),
    fiber_samples: int = 1024,
    amplitude: float = 0.2,
) -> ZoomSweepResult:
    """Certify co-reality and the rank filtration along fibrewise dilations.

    For each lambda (descending) the zoomed family is embedded (with the
    fiber scaled by lambda), the complex tangencies are scanned, framed
    against the derived prolongation of the same family, and certified.
    Per-lambda failures are recorded and the sweep continues.  lambda_star
    is the largest tested lambda from which every smaller tested lambda is
    certified; the limit certificate belongs to the un-zoomed (lambda -> 0)
    base-independent family.
    """
    lambdas = sorted((float(l) for l in lambdas), reverse=True)
    if not lambdas or lambdas[-1] <= 0.0:
        raise ValueError("lambdas must be positive")
    steps = []
    for lam in lambdas:
        try:
            family = zoom_family(fiber_curve, lam, grid_shape, amplitude)
            embedding = AmbientEmbedding(family, model=model, lam=lam)
            reference = derived_prolongation(family, fiber_samples)
            report = coreal_scan(
                embedding, j_field, fiber_samples, keep_planes=True
            )
            field = tangency_frame_field(
                embedding, j_field, reference, fiber_samples, report=report
            )
            cert = engel_margins(field)
            steps.append(ZoomStep(lam, report.co_real, report.min_gap, cert))
        except Exception as exc:  # per-lambda failures must not stop the sweep
            steps.append(ZoomStep(lam, False, np.nan, None, error=str(exc)))
    lambda_star = None
    for step in steps:  # descending; require an unbroken certified tail
        if all(s.passed for s in steps if s.lam <= step.lam):
            lambda_star = step.lam
            break
    limit_family = zoom_family(fiber_curve, 0.0, grid_shape, amplitude)
    limit_cert = engel_margins(derived_prolongation(limit_family, fiber_samples))
    return ZoomSweepResult(steps, lambda_star, limit_cert)
