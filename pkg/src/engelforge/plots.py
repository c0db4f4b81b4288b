"""Matplotlib SVG figures for curves, margins, and dilation sweeps.

Figures are rendered deterministically: the Agg backend, a fixed SVG hash
salt, and stripped date metadata make repeated runs byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "engelforge"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

DEFAULT_POLE = (0.0, 0.0, -1.0)


def save_figure(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def stereographic(points: np.ndarray, pole=DEFAULT_POLE) -> np.ndarray:
    """Stereographic projection of sphere points from the given pole.

    The default pole is the south pole, so curves living mostly in the
    northern hemisphere project near the origin.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = np.asarray(pole, dtype=float)
    p = p / np.linalg.norm(p)
    # orthonormal basis of the plane orthogonal to the pole
    helper = np.array([1.0, 0.0, 0.0])
    if abs(p @ helper) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    u = np.cross(p, helper)
    u /= np.linalg.norm(u)
    v = np.cross(p, u)
    denom = 1.0 - pts @ p
    denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
    return np.stack([pts @ u / denom, pts @ v / denom], axis=1)


def curve_figure(labeled_curves, pole=DEFAULT_POLE, samples: int = 1024):
    """Stereographic projections of spherical curves, one line per curve."""
    grid = np.arange(samples + 1) / samples
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    for label, curve in labeled_curves:
        proj = stereographic(curve.eval(grid), pole)
        ax.plot(proj[:, 0], proj[:, 1], linewidth=0.9, label=label)
    ax.plot([0.0], [0.0], marker="+", color="black", markersize=6)
    ax.set_aspect("equal")
    ax.set_xlabel("stereographic u")
    ax.set_ylabel("stereographic v")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def margin_figure(grid, values, xlabel, ylabel, title=""):
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.plot(np.asarray(grid, dtype=float), np.asarray(values, dtype=float),
            linewidth=0.9)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    return fig


def sweep_figure(lambdas, min_m4, limit_m4=None):
    """min m4 against the fiber dilation, with the base-independent limit."""
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    lam = np.asarray(lambdas, dtype=float)
    m4 = np.asarray(min_m4, dtype=float)
    ax.plot(lam, m4, marker="o", markersize=3, linewidth=0.9,
            label="min m4 at dilation")
    if limit_m4 is not None:
        ax.axhline(float(limit_m4), color="tab:red", linewidth=0.8,
                   linestyle="--", label="base-independent limit")
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_xscale("log")
    ax.set_xlabel("fiber dilation lambda")
    ax.set_ylabel("min m4")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig
