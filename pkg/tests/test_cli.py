import ast
import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from garmentwarp import cli, io
from garmentwarp import fixtures as fx
from garmentwarp.cli import EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK, main


@pytest.fixture(scope="module")
def fixdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    assert main(["fixtures", "--out", str(out)]) == EXIT_OK
    return out


def _digest(folder):
    return {p: hashlib.sha256((folder / p).read_bytes()).hexdigest() for p in sorted(os.listdir(folder))}


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# --- register ----------------------------------------------------------------


def test_register_identical(fixdir, tmp_path, capsys):
    sq = fixdir / "square.csv"
    code, _, err = _run(["register", sq, sq, "--out", tmp_path], capsys)
    assert code == EXIT_OK and err == ""
    diag = io.read_json(tmp_path / "diagnostics.json")
    assert diag["converged"] and diag["iterations"] <= 5
    assert set(io.read_json(tmp_path / "transform.json")) == {"base_points", "weights", "kernel_beta", "denorm"}


def test_register_not_converged(fixdir, tmp_path, capsys):
    code, _, _ = _run(
        ["register", fixdir / "bend_x.csv", fixdir / "bend_y.csv", "--out", tmp_path, "--max-iters", 1], capsys
    )
    assert code == EXIT_NOT_CONVERGED
    diag = io.read_json(tmp_path / "diagnostics.json")
    assert diag["iterations"] == 1 and not diag["converged"]
    assert (tmp_path / "transform.json").exists()


def test_register_malformed_csv(fixdir, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n3,abc\n")
    code, _, err = _run(["register", bad, fixdir / "square.csv", "--out", tmp_path / "o"], capsys)
    assert code == EXIT_INPUT
    assert err.startswith("error: MalformedCsv:") and "line 3" in err and len(err.strip().splitlines()) == 1


def test_register_missing_file(tmp_path, capsys):
    code, _, err = _run(["register", tmp_path / "nope.csv", tmp_path / "nope.csv", "--out", tmp_path], capsys)
    assert code == EXIT_INPUT and "nope.csv" in err


# --- configuration -----------------------------------------------------------


def test_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"registration": {"lambda2": 3.0, "gamma": 0.3}}))
    args = cli.build_parser().parse_args(["warp", "--garment", "g", "--garment-mask", "m", "--target", "t",
                                          "--out", "o", "--config", str(cfg), "--gamma", "0.4"])
    s = cli.settings_from_args(args, manifest_config={"registration": {"lambda2": 9.0, "tol": 1e-3}})
    assert s.registration.gamma == 0.4  # flag beats file
    assert s.registration.lambda2 == 3.0  # file beats manifest
    assert s.registration.tol == 1e-3  # manifest beats default
    assert s.registration.max_iters == cli.RegistrationConfig().max_iters


def test_unknown_config_key(fixdir, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"registration": {"lamda2": 1.0}}))
    sq = fixdir / "square.csv"
    code, _, err = _run(["register", sq, sq, "--out", tmp_path, "--config", cfg], capsys)
    assert code == EXIT_INPUT and "ConfigError" in err and "lamda2" in err


def test_invalid_parameter_value(fixdir, tmp_path, capsys):
    sq = fixdir / "square.csv"
    code, _, err = _run(["register", sq, sq, "--out", tmp_path, "--gamma", 1.5], capsys)
    assert code == EXIT_INPUT and "InvalidParams" in err


def test_no_environment_reads():
    tree = ast.parse(open(cli.__file__).read())
    names = {n.attr for n in ast.walk(tree) if isinstance(n, ast.Attribute) and getattr(n.value, "id", None) == "os"}
    assert "environ" not in names and "getenv" not in names


# --- tryon / warp ------------------------------------------------------------


def test_tryon_striped(fixdir, tmp_path, capsys):
    code, _, err = _run(["tryon", "--manifest", fixdir / "striped_manifest.json", "--out", tmp_path], capsys)
    assert code == EXIT_OK, err
    assert sorted(os.listdir(tmp_path)) == sorted(cli.OUTPUT_NAMES)
    diag = io.read_json(tmp_path / "diagnostics.json")
    wm = io.read_mask_png(tmp_path / "warped_mask.png")
    tr = io.read_mask_png(fixdir / "trapezoid_target.png")
    assert diag["target_iou"] >= 0.90
    assert diag["target_iou"] == pytest.approx(float((wm & tr).sum() / (wm | tr).sum()), abs=1e-12)


def test_tryon_many_manifests_jobs(fixdir, tmp_path, capsys):
    ms = [fixdir / "striped_manifest.json", fixdir / "identity_manifest.json"]
    args = ["tryon", "--manifest", ms[0], "--manifest", ms[1]]
    assert _run(args + ["--out", tmp_path / "a"], capsys)[0] == EXIT_OK
    assert _run(args + ["--out", tmp_path / "b", "--jobs", 2], capsys)[0] == EXIT_OK
    for stem in ("striped_manifest", "identity_manifest"):
        assert _digest(tmp_path / "a" / stem) == _digest(tmp_path / "b" / stem)


def test_tryon_missing_file_in_manifest(fixdir, tmp_path, capsys):
    m = io.read_json(fixdir / "striped_manifest.json")
    m["person_agnostic"] = "missing_person.png"
    path = fixdir / "broken_manifest.json"
    io.write_json(path, m)
    try:
        code, _, err = _run(["tryon", "--manifest", path, "--out", tmp_path], capsys)
    finally:
        path.unlink()
    assert code == EXIT_INPUT and "missing_person.png" in err


def test_tryon_resolution_mismatch(fixdir, tmp_path, capsys):
    small = io.read_rgba_png(fixdir / "striped_person.png")[:-8]
    io.write_rgba_png(tmp_path / "person.png", small)
    for key in ("striped_garment.png", "striped_garment_mask.png", "trapezoid_target.png"):
        (tmp_path / key).write_bytes((fixdir / key).read_bytes())
    io.write_json(tmp_path / "m.json", {"garment": "striped_garment.png", "garment_mask": "striped_garment_mask.png",
                                         "target_region": "trapezoid_target.png", "person_agnostic": "person.png"})
    code, _, err = _run(["tryon", "--manifest", tmp_path / "m.json", "--out", tmp_path / "o"], capsys)
    assert code == EXIT_INPUT and "DimensionMismatch" in err and "[validate]" in err


def test_tryon_manifest_config(fixdir, tmp_path, capsys):
    m = io.read_json(fixdir / "striped_manifest.json")
    m["config"] = {"registration": {"max_iters": 1}}
    path = fixdir / "cfg_manifest.json"
    io.write_json(path, m)
    try:
        code, _, _ = _run(["tryon", "--manifest", path, "--out", tmp_path], capsys)
        assert code == EXIT_NOT_CONVERGED
        assert io.read_json(tmp_path / "diagnostics.json")["registration"]["iterations"] == 1
        code, _, _ = _run(["tryon", "--manifest", path, "--out", tmp_path / "b", "--max-iters", 150], capsys)
        assert code == EXIT_OK
    finally:
        path.unlink()


def test_unwritable_output(fixdir, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = _run(["tryon", "--manifest", fixdir / "striped_manifest.json", "--out", blocker / "sub"], capsys)
    assert code == EXIT_INPUT and err.startswith("error:")


def test_warp_subcommand(fixdir, tmp_path, capsys):
    code, _, err = _run(["warp", "--garment", fixdir / "striped_garment.png",
                         "--garment-mask", fixdir / "striped_garment_mask.png",
                         "--target", fixdir / "trapezoid_target.png", "--out", tmp_path], capsys)
    assert code == EXIT_OK, err
    assert sorted(os.listdir(tmp_path)) == ["diagnostics.json", "warped.png", "warped_mask.png"]
    assert "timings" not in io.read_json(tmp_path / "diagnostics.json")


# --- eval / fixtures ---------------------------------------------------------


def test_eval(fixdir, tmp_path, capsys):
    img = fixdir / "identity_dressed.png"
    code, out, _ = _run(["eval", "--a", img, "--b", img, "--mask", fixdir / "identity_mask.png",
                         "--points-a", fixdir / "square.csv", "--points-b", fixdir / "square.csv"], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report == {"ssim": pytest.approx(1.0), "ssim_region": pytest.approx(1.0), "iou": 1.0, "rmse": 0.0}


def test_eval_rmse_length_mismatch(fixdir, tmp_path, capsys):
    img = fixdir / "identity_dressed.png"
    code, _, err = _run(["eval", "--a", img, "--b", img, "--points-a", fixdir / "square.csv",
                         "--points-b", fixdir / "circle.csv"], capsys)
    assert code == EXIT_INPUT and "LengthMismatch" in err


def test_fixtures_reproducible(fixdir, tmp_path, capsys):
    assert _run(["fixtures", "--out", tmp_path, "--seed", 42], capsys)[0] == EXIT_OK
    assert _digest(tmp_path) == _digest(fixdir)
    meta = io.read_json(tmp_path / "striped.json")
    assert io.read_mask_png(tmp_path / "striped_garment_mask.png").sum() == meta["garment_mask_area"]
    assert io.read_mask_png(tmp_path / "identity_mask.png").sum() == io.read_json(tmp_path / "identity.json")["mask_area"]


def test_fixtures_seed_changes_random_parts(tmp_path, capsys):
    assert _run(["fixtures", "--out", tmp_path / "a", "--seed", 1], capsys)[0] == EXIT_OK
    assert _run(["fixtures", "--out", tmp_path / "b", "--seed", 2], capsys)[0] == EXIT_OK
    a, b = _digest(tmp_path / "a"), _digest(tmp_path / "b")
    assert a["square.csv"] == b["square.csv"] and a["bend_y.csv"] != b["bend_y.csv"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "garmentwarp", "fixtures", "--out", str(tmp_path), "--seed", "-1"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_INPUT and proc.stderr.startswith("error: ConfigError:")


def test_bend_fixture_matches_generator(fixdir):
    X, _, Y = fx.bend_case(200, 0.2, fx.DEFAULT_SEED)
    assert np.abs(io.read_points_csv(fixdir / "bend_y.csv") - Y).max() <= 5e-7
    assert np.abs(io.read_points_csv(fixdir / "bend_x.csv") - X).max() <= 5e-7
