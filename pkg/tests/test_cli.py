"""Unit tests for the command-line front-end and report emission."""

import json

import numpy as np

from engelforge import random_surrounding_curve
from engelforge.cli import main
from engelforge.report import config_hash, dumps, format_float


def run_cli(tmp_path, verb, config, seed=None, name="config.json"):
    tmp_path.mkdir(parents=True, exist_ok=True)
    cfg = tmp_path / name
    cfg.write_text(json.dumps(config))
    out = tmp_path / "out"
    argv = [verb, "--config", str(cfg), "--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    code = main(argv)
    return code, out


def read_report(out, verb):
    return json.loads((out / f"{verb.replace('-', '_')}_report.json").read_text())


def test_missing_and_invalid_configs_are_usage_errors(tmp_path):
    code = main(["convexity", "--config", str(tmp_path / "nope.json")])
    assert code == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["convexity", "--config", str(bad)]) == 2
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    out = tmp_path / "out"
    assert main(["convexity", "--config", str(empty), "--out", str(out)]) == 2
    assert not out.exists()  # usage errors write nothing


def test_convexity_verb_writes_report_and_figures(tmp_path):
    code, out = run_cli(tmp_path, "convexity",
                        {"curve": {"stock": "latitude", "height": 0.6}})
    assert code == 0
    report = read_report(out, "convexity")
    assert report["passed"] is True and report["convex"] is True
    assert report["config_hash"] == config_hash(
        {"curve": {"stock": "latitude", "height": 0.6}}
    )
    for name in ("convexity_margins.csv", "curve.svg", "convexity_margin.svg"):
        assert (out / name).exists(), name
    header = (out / "convexity_margins.csv").read_text().splitlines()
    assert header[0].startswith("# seed=0 config=")
    assert header[1] == "t,det"


def test_surround_verb_fails_for_non_surrounding_curves(tmp_path):
    code, out = run_cli(tmp_path, "surround", {"curve": {"stock": "great_circle"}})
    assert code == 1
    assert read_report(out, "surround")["strictly_surrounding"] is False


def test_rebalance_verb_on_a_random_surrounding_curve(tmp_path):
    curve = random_surrounding_curve(np.random.default_rng(61))
    code, out = run_cli(tmp_path, "rebalance", {"curve": curve.to_json()})
    assert code == 0
    report = read_report(out, "rebalance")
    assert report["integral_norm"] <= 1e-10
    trace = (out / "newton_trace.csv").read_text().splitlines()
    assert trace[1] == "iteration,residual"
    assert len(trace) >= 3
    for name in ("rebalanced_curve.json", "diffeo.json", "rebalance.svg"):
        assert (out / name).exists(), name


def test_rebalance_verb_reports_errors_as_json(tmp_path):
    code, out = run_cli(tmp_path, "rebalance",
                        {"curve": {"stock": "latitude", "height": 0.6}})
    assert code == 1
    error = json.loads((out / "error.json").read_text())
    assert error["error"] == "NotSurrounding"


def test_integrate_verb_on_zero_integral_curve(tmp_path):
    code, out = run_cli(tmp_path, "integrate",
                        {"curve": {"stock": "great_circle"}})
    assert code == 0
    report = read_report(out, "integrate")
    assert report["input_integral_norm"] <= 1e-12
    assert (out / "primitive_curve.json").exists()


def test_prolong_check_verb_latitude_family(tmp_path):
    config = {"curve": {"stock": "latitude", "height": 0.6},
              "kind": "direction", "grid_shape": [8, 8, 8],
              "fiber_samples": 16}
    code, out = run_cli(tmp_path, "prolong-check", config)
    assert code == 0
    report = read_report(out, "prolong_check")
    assert report["certificate"]["engel"] is True
    assert (out / "margins_by_fiber.csv").exists()
    assert (out / "m4_by_fiber.svg").exists()


def test_prolong_check_verb_rejects_bad_grid(tmp_path):
    config = {"curve": {"stock": "latitude"}, "grid_shape": [4, 8, 8]}
    code, _out = run_cli(tmp_path, "prolong-check", config)
    assert code == 2


def test_cr_check_verb_flat_standard(tmp_path):
    config = {"curve": {"stock": "great_circle"}, "model": "flat",
              "lambda": 1.0, "amplitude": 0.0, "fiber_samples": 16}
    code, out = run_cli(tmp_path, "cr-check", config)
    assert code == 0
    report = read_report(out, "cr_check")
    assert report["tangency"]["co_real"] is True
    assert report["max_principal_angle"] <= 1e-8


def test_curve_file_roundtrip_through_config(tmp_path):
    curve = random_surrounding_curve(np.random.default_rng(62))
    curve_file = tmp_path / "curve.json"
    curve_file.write_text(json.dumps(curve.to_json()))
    code, out = run_cli(tmp_path, "surround", {"curve": {"path": "curve.json"}})
    assert code == 0
    assert read_report(out, "surround")["strictly_surrounding"] is True


def test_reports_are_deterministic(tmp_path):
    config = {"curve": {"stock": "latitude", "height": 0.6}}
    _code, out_a = run_cli(tmp_path / "a", "convexity", config)
    _code, out_b = run_cli(tmp_path / "b", "convexity", config)
    for name in ("convexity_report.json", "convexity_margins.csv",
                 "curve.svg", "convexity_margin.svg"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_seed_flag_overrides_config_seed(tmp_path):
    config = {"curve": {"stock": "latitude"}, "seed": 7}
    code, out = run_cli(tmp_path, "convexity", config, seed=99)
    assert code == 0
    assert read_report(out, "convexity")["seed"] == 99


def test_float_formatting_and_canonical_json():
    assert format_float(float("nan")) == '"nan"'
    assert format_float(float("inf")) == '"inf"'
    assert format_float(0.1) == "0.10000000000000001"
    assert dumps({"b": 1, "a": [True, None]}) == '{"a":[true,null],"b":1}'
    # hash is stable under key order
    assert config_hash({"x": 1, "y": 2}) == config_hash({"y": 2, "x": 1})
