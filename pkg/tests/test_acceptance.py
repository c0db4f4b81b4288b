"""Acceptance gate: every shipped guarantee at its stated tolerance.

One test per guarantee; ``pytest -v`` prints one pass/fail line each.  Every
test also enforces its wall-clock budget, so a pass certifies both the
numerical claim and the runtime.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from engelforge import (
    AmbientEmbedding,
    base_independent_family,
    convexity_margin,
    engel_margins,
    fd_crosscheck,
    graft,
    graft_homotopy_margins,
    great_circle,
    latitude_circle,
    lemma_check,
    n_complete_surround_check,
    perturbed_J,
    prolonged_distribution,
    random_spherical_curve,
    random_surrounding_curve,
    rebalance,
    tilt_solve,
    two_chart_patch_demo,
    zoom_family,
    zoom_sweep,
    ACSField,
    VectorFieldModel,
)
from engelforge.errors import NotSurrounding


class Budget:
    """Wall-clock budget context: fails the test when exceeded."""

    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.elapsed = time.perf_counter() - self.t0
        if exc_type is None:
            assert self.elapsed < self.seconds, (
                f"took {self.elapsed:.1f}s, budget {self.seconds:.0f}s"
            )
        return False


def test_latitude_convexity_margin_closed_form():
    """Latitude margins match (2 pi)^3 r^2 c; great circle sits at zero."""
    with Budget(1.0):
        for c in (0.2, 0.6, 0.9):
            r2 = 1.0 - c * c
            expected = (2.0 * np.pi) ** 3 * r2 * c
            rep = convexity_margin(latitude_circle(c))
            rel = abs(rep.min_value - expected) / expected
            assert rel <= 1e-6, f"height {c}: relative error {rel:.3e}"
            # the determinant is constant along a latitude circle
            assert np.max(np.abs(rep.values - expected)) / expected <= 1e-6
        gc = convexity_margin(great_circle())
        assert np.max(np.abs(gc.values)) <= 1e-10


def test_grafts_are_convex_and_n_completely_surrounding(seed_pair):
    """Grafts at s=1 for n=1,2,3: convex, two disjoint surrounding n-wiggles,
    and convexity along a 64-point homotopy grid."""
    curve, arc = seed_pair
    s_grid = np.linspace(0.0, 1.0, 64)
    with Budget(30.0):
        for n in (1, 2, 3):
            out = graft(curve, arc, n, 1.0)
            margin = convexity_margin(
                out, samples=max(1024, 4 * out.modes)
            ).min_value
            assert margin > 0.0, f"n={n}: convexity margin {margin:.3e}"
            ok, surround = n_complete_surround_check(out, n)
            assert ok, f"n={n}: no two disjoint surrounding {n}-wiggles"
            assert surround > 0.0, f"n={n}: wiggle surround margin {surround:.3e}"
            homotopy = graft_homotopy_margins(curve, arc, n, s_grid)
            assert homotopy.min() > 0.0, (
                f"n={n}: homotopy margin {homotopy.min():.3e} at "
                f"s={s_grid[int(np.argmin(homotopy))]:.3f}"
            )


def test_rebalance_random_curves_and_hemisphere_rejection():
    """25 random surrounding curves rebalance to |integral| <= 1e-10 in at
    most 20 Newton iterations; 10 hemisphere-trapped curves are rejected."""
    rng = np.random.default_rng(20240817)
    quad = np.arange(4096) / 4096
    with Budget(60.0):
        for k in range(25):
            curve = random_surrounding_curve(rng)
            sol = tilt_solve(curve, tol=1e-10)
            assert sol.iterations <= 20, f"curve {k}: {sol.iterations} iterations"
            out, diffeo = rebalance(curve, tol=1e-10)
            # series-integral check on the output
            series_int = float(np.linalg.norm(out.a[0]))
            assert series_int <= 1e-10, f"curve {k}: |integral| {series_int:.3e}"
            # independent quadrature of the reparametrized input
            resampled = curve.eval(diffeo.inverse(quad))
            quad_int = float(np.linalg.norm(resampled.mean(axis=0)))
            assert quad_int <= 1e-10, f"curve {k}: quadrature {quad_int:.3e}"
        for k in range(10):
            trapped = random_spherical_curve(rng)
            with pytest.raises(NotSurrounding):
                rebalance(trapped)


def _trig_field_pair():
    """Two vector fields with analytic jets and nonpolynomial bracket terms,
    so the central-difference cross-check error is genuinely O(h^2)."""

    def val_a(p):
        return np.stack(
            [np.sin(p[:, 3]), np.cos(p[:, 0] + p[:, 3]), np.sin(2 * p[:, 1]),
             p[:, 2] ** 2],
            axis=1,
        )

    def jac_a(p):
        j = np.zeros((len(p), 4, 4))
        j[:, 0, 3] = np.cos(p[:, 3])
        j[:, 1, 0] = -np.sin(p[:, 0] + p[:, 3])
        j[:, 1, 3] = -np.sin(p[:, 0] + p[:, 3])
        j[:, 2, 1] = 2 * np.cos(2 * p[:, 1])
        j[:, 3, 2] = 2 * p[:, 2]
        return j

    def val_b(p):
        return np.stack(
            [np.cos(p[:, 1]), np.sin(p[:, 2] + 2 * p[:, 0]),
             p[:, 3] * p[:, 0], np.cos(p[:, 3])],
            axis=1,
        )

    def jac_b(p):
        j = np.zeros((len(p), 4, 4))
        j[:, 0, 1] = -np.sin(p[:, 1])
        j[:, 1, 0] = 2 * np.cos(p[:, 2] + 2 * p[:, 0])
        j[:, 1, 2] = np.cos(p[:, 2] + 2 * p[:, 0])
        j[:, 2, 0] = p[:, 3]
        j[:, 2, 3] = p[:, 0]
        j[:, 3, 3] = -np.sin(p[:, 3])
        return j

    return VectorFieldModel(val_a, jac_a), VectorFieldModel(val_b, jac_b)


def test_prolonged_distribution_rank_filtration_certificates():
    """Base-independent latitude family certifies the full rank filtration on
    a 16^3 x 128 grid; the great-circle family has vanishing top margin; the
    bracket cross-check error contracts at the central-difference rate."""
    with Budget(120.0):
        fam = base_independent_family(latitude_circle(0.6), (16, 16, 16))
        cert = engel_margins(prolonged_distribution(fam, 128))
        assert cert.min_m3 > 0.0, f"m3 minimum {cert.min_m3:.3e}"
        assert cert.min_m4 > 0.0, f"m4 minimum {cert.min_m4:.3e}"
        # closed form: the top margin of the latitude family is the height
        assert abs(cert.min_m4 - 0.6) <= 1e-9

        gc_fam = base_independent_family(great_circle(), (16, 16, 16))
        gc_cert = engel_margins(prolonged_distribution(gc_fam, 128))
        assert gc_cert.min_m4 <= 1e-9, f"great-circle m4 {gc_cert.min_m4:.3e}"

        x_field, y_field = _trig_field_pair()
        point = np.array([0.3, 0.7, 0.2, 0.5])
        errs = [fd_crosscheck(x_field, y_field, point, h)
                for h in (1e-2, 5e-3, 2.5e-3)]
        for e0, e1 in zip(errs, errs[1:]):
            ratio = e0 / e1
            assert 3.5 <= ratio <= 4.5, f"error ratio {ratio:.3f} not ~4"


def test_flat_standard_tangency_matches_prolongation(fiber_curve):
    """Tangencies of the flat standard-structure embedding of a
    base-independent family coincide with the derived prolongation for every
    tested fiber dilation (max principal angle <= 1e-8 on 8^3 x 64)."""
    with Budget(120.0):
        family = zoom_family(fiber_curve, 1.0, (8, 8, 8), amplitude=0.0)
        for lam in (1.0, 0.1, 0.01):
            embedding = AmbientEmbedding(family, model="flat", lam=lam)
            angle = lemma_check(embedding, fiber_samples=64)
            assert angle <= 1e-8, f"lambda={lam}: max angle {angle:.3e}"


LAMBDAS = [1.0, 0.5, 0.2, 0.1, 0.05, 0.01]


@pytest.mark.parametrize(
    "model,j_kind",
    [("flat", "conjugated"), ("clifford", "standard")],
    ids=["flat-conjugated", "clifford-standard"],
)
def test_zoom_sweep_certifies_down_to_threshold(fiber_curve, model, j_kind):
    """Dilation sweep with rotation-field amplitude 0.2: co-real with a
    positive top margin down to lambda = 0.01, and the margin there lies
    within 5% of the base-independent limit."""
    if j_kind == "conjugated":
        j_field = perturbed_J(0.2, rng=np.random.default_rng(0))
    else:
        j_field = ACSField.standard()
    with Budget(300.0):
        result = zoom_sweep(
            fiber_curve, model, j_field, LAMBDAS,
            grid_shape=(8, 8, 8), fiber_samples=1024, amplitude=0.2,
        )
        for step in result.steps:
            assert step.error is None, f"lambda={step.lam}: {step.error}"
            assert step.co_real, f"lambda={step.lam}: not co-real"
            assert step.certificate.min_m4 > 0.0, (
                f"lambda={step.lam}: m4 {step.certificate.min_m4:.3e}"
            )
        assert result.lambda_star is not None
        assert result.lambda_star >= 0.01
        smallest = min(result.steps, key=lambda s: s.lam)
        limit = result.limit_certificate.min_m4
        deviation = abs(smallest.certificate.min_m4 - limit) / abs(limit)
        assert deviation <= 0.05, f"limit deviation {deviation:.4f} > 5%"


def test_two_chart_patching_identity(nu_embedded):
    """Two-chart patch with fiber shift 0.25: the transition translation is
    the integral of the fibrewise derivative to 1e-8, and fibrewise
    derivatives are unchanged to 1e-8."""
    with Budget(30.0):
        _family, report, v_01 = two_chart_patch_demo(nu_embedded, delta=0.25)
        # independent oracle: composite-Simpson quadrature of the derivative
        from scipy.integrate import simpson

        grid = np.linspace(0.0, 0.25, 4097)
        vals = nu_embedded.derivative().eval(grid)
        oracle = simpson(vals, x=grid, axis=0)
        assert np.linalg.norm(v_01 - oracle) <= 1e-8
        assert report.max_translation_error <= 1e-8
        assert report.max_derivative_error <= 1e-8


def test_pipeline_reports_are_byte_identical(tmp_path):
    """Two pipeline runs with the same configuration and seed produce
    byte-identical reports, data files, and figures."""
    config = {
        "seed": 42,
        "n": 1,
        "grid_shape": [8, 8, 8],
        "fiber_samples": 1024,
        "zoom": {"model": "clifford", "lambdas": [0.1]},
    }
    cfg_path = tmp_path / "pipeline.json"
    cfg_path.write_text(json.dumps(config))
    outputs = []
    for run in ("run_a", "run_b"):
        out_dir = tmp_path / run
        proc = subprocess.run(
            [sys.executable, "-m", "engelforge.cli", "pipeline",
             "--config", str(cfg_path), "--out", str(out_dir), "--seed", "42"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(out_dir)
    files_a = sorted(p.name for p in outputs[0].iterdir())
    files_b = sorted(p.name for p in outputs[1].iterdir())
    assert files_a == files_b and files_a, f"file sets differ: {files_a} vs {files_b}"
    for name in files_a:
        bytes_a = (outputs[0] / name).read_bytes()
        bytes_b = (outputs[1] / name).read_bytes()
        assert bytes_a == bytes_b, f"{name} differs between runs"
    report = json.loads((outputs[0] / "pipeline_report.json").read_text())
    assert report["seed"] == 42
    assert len(report["config_hash"]) == 64
    assert report["passed"] is True
