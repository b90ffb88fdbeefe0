import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from greedygrid.benchgen import GenerateParams, generate
from greedygrid.cli import DATASET_PRESETS, main
from greedygrid.geometry import RigidTransform
from greedygrid.io import write_point_cloud
from greedygrid.metrics import rre, rte
from greedygrid.rotgrid import build_grid
from greedygrid.synthetic import grid_trial, sphere_surface


@pytest.fixture(scope="module")
def trial_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("clouds")
    trial = grid_trial(np.random.default_rng(11), build_grid(30, 15), 0.3, 1500)
    write_point_cloud(d / "src.ply", trial.source)
    write_point_cloud(d / "tgt.ply", trial.target)
    return d, trial


def run(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_register_end_to_end(trial_files, tmp_path, capsys):
    d, trial = trial_files
    out = tmp_path / "res.json"
    args = ["register", "--source", d / "src.ply", "--target", d / "tgt.ply", "--voxel-resolution", 0.06,
            "--angle-range", 30, "--angle-step", 15, "--refine", "icp", "--output", out]  # fmt: skip
    code, _ = run(args, capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    coarse = RigidTransform.from_matrix(doc["coarse"])
    assert rre(trial.truth.rotation, coarse.rotation) < 1e-4
    assert rte(trial.truth.translation, coarse.translation) < 1e-6
    assert doc["refined"] is not None and doc["diagnostics"]["icp"]["iterations"] >= 1
    assert doc["config"]["voxel_resolution"] == 0.06
    assert "total" in doc["timings"]


def test_register_to_stdout_without_refine(trial_files, capsys):
    d, _ = trial_files
    code, cap = run(["register", "--source", d / "src.ply", "--target", d / "tgt.ply",
                     "--voxel-resolution", 0.1, "--angle-range", 0], capsys)  # fmt: skip
    assert code == 0
    assert json.loads(cap.out)["refined"] is None


def test_config_file_and_flag_precedence(trial_files, tmp_path, capsys):
    d, _ = trial_files
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"voxel_resolution": 0.1, "angle_range": 0, "engine": "direct"}))
    code, cap = run(["register", "--source", d / "src.ply", "--target", d / "tgt.ply",
                     "--config", cfg, "--voxel-resolution", 0.2], capsys)  # fmt: skip
    assert code == 0
    echoed = json.loads(cap.out)["config"]
    assert echoed["voxel_resolution"] == 0.2 and echoed["engine"] == "direct" and echoed["angle_range"] == 0


def test_preset_supplies_resolution(trial_files, capsys):
    d, _ = trial_files
    code, cap = run(["register", "--source", d / "src.ply", "--target", d / "tgt.ply",
                     "--preset", "faustpartial", "--angle-range", 0], capsys)  # fmt: skip
    assert code == 0
    assert json.loads(cap.out)["config"]["voxel_resolution"] == DATASET_PRESETS["faustpartial"]["voxel_resolution"]


def test_usage_errors(trial_files, tmp_path, capsys):
    d, _ = trial_files
    with pytest.raises(SystemExit) as info:
        main(["register", "--source", str(d / "src.ply")])
    assert info.value.code == 1
    code, cap = run(["register", "--source", d / "src.ply", "--target", d / "tgt.ply"], capsys)
    assert code == 1 and "voxel-resolution" in cap.err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"voxel_size": 1}))
    code, _ = run(["register", "--source", d / "src.ply", "--target", d / "tgt.ply", "--config", bad], capsys)
    assert code == 1


def test_data_error(trial_files, tmp_path, capsys):
    d, _ = trial_files
    broken = tmp_path / "broken.ply"
    broken.write_bytes(b"ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n")
    for src in (tmp_path / "nope.ply", broken):
        code, cap = run(["register", "--source", src, "--target", d / "tgt.ply", "--voxel-resolution", 0.1], capsys)
        assert code == 2 and "data error" in cap.err


def test_budget_error(trial_files, capsys):
    d, _ = trial_files
    code, cap = run(["register", "--source", d / "src.ply", "--target", d / "tgt.ply",
                     "--voxel-resolution", 0.01, "--max-cells", 1000], capsys)  # fmt: skip
    assert code == 3 and "resource budget" in cap.err


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    generate(d, [("sphere", sphere_surface(np.random.default_rng(1), 3000, radius=0.2))], GenerateParams())
    return d


def test_evaluate_perfect_results(bench_dir, tmp_path, capsys):
    manifest = json.loads((bench_dir / "manifest.json").read_text())
    results = {"results": [
        {"id": p["id"], "transform": RigidTransform.from_matrix(p["gt"]).inverse().as_matrix().reshape(-1).tolist()}
        for p in manifest["pairs"]
    ]}  # fmt: skip
    res = tmp_path / "results.json"
    res.write_text(json.dumps(results))
    report = tmp_path / "report.csv"
    code, cap = run(["evaluate", "--manifest", bench_dir / "manifest.json", "--results", res,
                     "--preset", "faustpartial", "--report", report], capsys)  # fmt: skip
    assert code == 0
    assert json.loads(cap.out)["recall"] == 1.0
    rows = list(csv.DictReader(report.open()))
    assert len(rows) == len(manifest["pairs"]) and all(r["success"] == "1" for r in rows)

    code, cap = run(["evaluate", "--manifest", bench_dir / "manifest.json", "--results", res], capsys)
    assert code == 1


def test_evaluate_missing_pair_is_data_error(bench_dir, tmp_path, capsys):
    res = tmp_path / "results.json"
    res.write_text(json.dumps({"results": []}))
    code, cap = run(["evaluate", "--manifest", bench_dir / "manifest.json", "--results", res,
                     "--tau-r", 5, "--tau-t", 0.1, "--report", tmp_path / "r.json"], capsys)  # fmt: skip
    assert code == 2 and "missing results" in cap.err


def test_generate_benchmark(tmp_path, capsys):
    scans = tmp_path / "scans"
    scans.mkdir()
    write_point_cloud(scans / "ball.ply", sphere_surface(np.random.default_rng(2), 3000, radius=0.2))
    code, cap = run(["generate-benchmark", "--scans", scans, "--out", tmp_path / "out", "--seed", 5], capsys)
    assert code == 0 and "pairs written" in cap.out
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["params"]["rng_seed"] == 5 and manifest["pairs"]
    code, _ = run(["generate-benchmark", "--scans", tmp_path / "nowhere", "--out", tmp_path / "o2"], capsys)
    assert code == 1


@pytest.mark.slow
def test_selftest_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "greedygrid", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
