"""Lie-bracket calculus and the rank-filtration certificate for plane fields.

A rank-2 plane field D on a 4-dimensional chart model is maximally
non-integrable (Engel) when D, [D,D] and [D,[D,D]] have ranks 2, 3, 4.
The certificate samples normalized volume margins of these spans on a grid:
m2 for the frame itself, m3 after one bracket, m4 after a second bracket
(the better of the two candidate second brackets).  All margins lie in
[-1, 1]; positivity of the minima certifies the rank filtration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFrame
from .prolong import PlaneField, grid_jets

_TINY = 1e-300


@dataclass
class VectorFieldModel:
    """Vector field on a 4-dimensional chart with analytic jets.

    ``val``/``jac``/``hess`` map point arrays (N, 4) to values (N, 4),
    Jacobians (N, 4, 4) with layout d val_i / d x_j at [..., i, j], and
    optional Hessians (N, 4, 4, 4).
    """

    val: callable
    jac: callable
    hess: callable | None = None

    @staticmethod
    def constant(vector) -> "VectorFieldModel":
        v = np.asarray(vector, dtype=float)
        return VectorFieldModel(
            val=lambda p: np.broadcast_to(v, (len(np.atleast_2d(p)), 4)).copy(),
            jac=lambda p: np.zeros((len(np.atleast_2d(p)), 4, 4)),
            hess=lambda p: np.zeros((len(np.atleast_2d(p)), 4, 4, 4)),
        )


def lie_bracket(X: VectorFieldModel, Y: VectorFieldModel, point) -> np.ndarray:
    """[X, Y] = DY.X - DX.Y from exact jets; (4,) for a single point."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    out = np.einsum("nij,nj->ni", Y.jac(pts), X.val(pts)) - np.einsum(
        "nij,nj->ni", X.jac(pts), Y.val(pts)
    )
    return out[0] if np.ndim(point) == 1 else out


def fd_crosscheck(X: VectorFieldModel, Y: VectorFieldModel, point, h: float) -> float:
    """|bracket via exact jets - bracket via central differences at step h|."""
    if h <= 0.0:
        raise ValueError("step h must be positive")
    p = np.asarray(point, dtype=float).reshape(4)
    exact = lie_bracket(X, Y, p)

    def fd_jac(field):
        cols = []
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            cols.append(
                (field.val((p + e)[None, :])[0] - field.val((p - e)[None, :])[0])
                / (2.0 * h)
            )
        return np.stack(cols, axis=1)

    pts = p[None, :]
    approx = fd_jac(Y) @ X.val(pts)[0] - fd_jac(X) @ Y.val(pts)[0]
    return float(np.linalg.norm(exact - approx))


@dataclass
class EngelCertificate:
    """Grid minima of the rank-filtration margins of a plane field."""

    grid_shape: tuple
    fiber_samples: int
    min_m2: float
    min_m3: float
    min_m4: float
    argmin_m2: tuple
    argmin_m3: tuple
    argmin_m4: tuple
    lipschitz_estimate: float
    non_integrable: bool
    engel: bool
    m2: np.ndarray | None = None
    m3: np.ndarray | None = None
    m4: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "grid_shape": list(self.grid_shape),
            "fiber_samples": self.fiber_samples,
            "min_m2": self.min_m2,
            "min_m3": self.min_m3,
            "min_m4": self.min_m4,
            "argmin_m2": list(self.argmin_m2),
            "argmin_m3": list(self.argmin_m3),
            "argmin_m4": list(self.argmin_m4),
            "lipschitz_estimate": self.lipschitz_estimate,
            "non_integrable": self.non_integrable,
            "engel": self.engel,
        }


def _gram_volume(vectors) -> np.ndarray:
    """sqrt det Gram of a list of (..., 4) vectors."""
    k = len(vectors)
    gram = np.empty(vectors[0].shape[:-1] + (k, k))
    for i in range(k):
        for j in range(i, k):
            gram[..., i, j] = np.sum(vectors[i] * vectors[j], axis=-1)
            gram[..., j, i] = gram[..., i, j]
    return np.sqrt(np.maximum(np.linalg.det(gram), 0.0))


def _argmin_coords(values: np.ndarray, periodic: bool) -> tuple:
    idx = np.unravel_index(int(np.argmin(values)), values.shape)
    n1, n2, n3, nt = values.shape
    coords = []
    for i, n in zip(idx[:3], (n1, n2, n3)):
        coords.append(i / n if periodic else i / max(n - 1, 1))
    coords.append(idx[3] / nt)
    return tuple(coords)


def engel_margins(
    field: PlaneField,
    second_bracket_policy: str = "best",
    store_samples: bool = False,
    degenerate_tol: float = 1e-10,
) -> EngelCertificate:
    """Rank-filtration margins of a plane field over its sample grid.

    The first bracket Z = [X1, X2] comes from the field's interpolation
    jets; the second brackets differentiate the gridded Z in the same
    spline-in-base / spectral-in-fiber model.  ``second_bracket_policy``
    selects how the two candidates [X1, Z] and [X2, Z] enter m4:

    - "best" (default): per sample, the candidate with the larger absolute
      4-volume transverse to {X1, X2, Z} is selected and its normalized
      volume reported.  A candidate that degenerates to a short vector
      cannot inflate the margin this way, which keeps m4 continuous in the
      field (a vanishing bracket has an arbitrary direction after
      normalization).
    - "max": raw maximum of the two normalized volumes.
    - "first"/"second": a single candidate.
    """
    if second_bracket_policy not in ("best", "max", "first", "second"):
        raise ValueError(f"unknown policy {second_bracket_policy!r}")
    frames, jets = field.jets()
    x1 = frames[..., 0, :]
    x2 = frames[..., 1, :]
    j1 = jets[..., 0, :, :]
    j2 = jets[..., 1, :, :]
    n1 = np.linalg.norm(x1, axis=-1)
    n2 = np.linalg.norm(x2, axis=-1)

    m2 = _gram_volume([x1, x2]) / np.maximum(n1 * n2, _TINY)
    if float(m2.min()) <= degenerate_tol:
        raise DegenerateFrame(
            f"m2 = {float(m2.min()):.3e} <= {degenerate_tol:.1e} at "
            f"{_argmin_coords(m2, field.periodic)}"
        )

    z = np.einsum("...ij,...j->...i", j2, x1) - np.einsum("...ij,...j->...i", j1, x2)
    nz = np.linalg.norm(z, axis=-1)
    m3 = _gram_volume([x1, x2, z]) / np.maximum(n1 * n2 * nz, _TINY)

    dz = grid_jets(z, field.periodic)
    candidates = []
    if second_bracket_policy in ("best", "max", "first"):
        candidates.append(
            np.einsum("...ij,...j->...i", dz, x1)
            - np.einsum("...ij,...j->...i", j1, z)
        )
    if second_bracket_policy in ("best", "max", "second"):
        candidates.append(
            np.einsum("...ij,...j->...i", dz, x2)
            - np.einsum("...ij,...j->...i", j2, z)
        )
    vols = []
    norms = []
    for w in candidates:
        stack = np.stack([x1, x2, z, w], axis=-2)
        vols.append(np.abs(np.linalg.det(stack)))
        norms.append(np.linalg.norm(w, axis=-1))
    if second_bracket_policy == "best" and len(candidates) == 2:
        pick = vols[1] > vols[0]
        vol = np.where(pick, vols[1], vols[0])
        nw = np.where(pick, norms[1], norms[0])
        m4 = vol / np.maximum(n1 * n2 * nz * nw, _TINY)
    else:
        m4 = np.zeros_like(m2)
        for vol, nw in zip(vols, norms):
            m4 = np.maximum(
                m4, vol / np.maximum(n1 * n2 * nz * nw, _TINY)
            )

    # grid-Lipschitz estimate of the decisive margin, for coverage judgment
    lip = 0.0
    for axis in range(4):
        n = m4.shape[axis]
        spacing = 1.0 / n if (field.periodic or axis == 3) else 1.0 / (n - 1)
        diff = np.abs(np.diff(m4, axis=axis))
        if diff.size:
            lip = max(lip, float(diff.max()) / spacing)

    min_m3 = float(m3.min())
    min_m4 = float(m4.min())
    return EngelCertificate(
        grid_shape=tuple(field.grid_shape),
        fiber_samples=field.fiber_samples,
        min_m2=float(m2.min()),
        min_m3=min_m3,
        min_m4=min_m4,
        argmin_m2=_argmin_coords(m2, field.periodic),
        argmin_m3=_argmin_coords(m3, field.periodic),
        argmin_m4=_argmin_coords(m4, field.periodic),
        lipschitz_estimate=lip,
        non_integrable=min_m3 > 0.0,
        engel=min_m3 > 0.0 and min_m4 > 0.0,
        m2=m2 if store_samples else None,
        m3=m3 if store_samples else None,
        m4=m4 if store_samples else None,
    )
