import json
import subprocess
import sys

import numpy as np
import pytest

from radcal import cli
from radcal.config import write_run_config
from radcal.errors import all_error_classes


def small_config(config, changes=None):
    """The default fixture restricted to two bands and a short grid, for speed."""
    doc = config.to_dict()
    doc["bands"] = ["rededge", "nir"]
    doc["sweep"]["exposures_ms"] = doc["sweep"]["exposures_ms"][:10]
    doc["vi"]["n_plots"] = 12
    for (section, key), value in (changes or {}).items():
        doc[section][key] = value
    return doc


@pytest.fixture
def cfg_path(tmp_path, config):
    from radcal.config import RunConfig
    path = tmp_path / "config.json"
    write_run_config(RunConfig(small_config(config)), path)
    return path


def tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_help_lists_every_exit_code():
    out = subprocess.run([sys.executable, "-m", "radcal.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cls in all_error_classes():
        assert f"{cls.exit_code:<3d} {cls.__name__}" in out.stdout
    codes = [c.exit_code for c in all_error_classes()]
    assert len(codes) == len(set(codes))


def test_missing_config(tmp_path, capsys):
    code = cli.main(["sweep", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "o")])
    assert code == 65
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "MissingInputError"
    assert "absent.json" in record["message"] and record["config"].endswith("absent.json")


def test_invalid_config(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"seed": 1}))
    assert cli.main(["vi", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 62
    assert json.loads(capsys.readouterr().err)["exit_code"] == 62


def test_bad_command():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate", "--config", "x", "--out", "y"])
    assert exc.value.code == 2


@pytest.mark.parametrize("command", cli.COMMANDS)
def test_commands_are_idempotent_and_leave_inputs_alone(tmp_path, cfg_path, command):
    before = cfg_path.read_bytes()
    out = tmp_path / "out"
    assert cli.main([command, "--config", str(cfg_path), "--out", str(out)]) == 0
    first = tree(out)
    assert first
    assert cli.main([command, "--config", str(cfg_path), "--out", str(out)]) == 0
    assert tree(out) == first
    assert cfg_path.read_bytes() == before


def test_thread_count_does_not_change_output(tmp_path, cfg_path, monkeypatch):
    monkeypatch.setenv("RADCAL_THREADS", "1")
    cli.main(["crossmat", "--config", str(cfg_path), "--out", str(tmp_path / "a")])
    monkeypatch.setenv("RADCAL_THREADS", "6")
    cli.main(["crossmat", "--config", str(cfg_path), "--out", str(tmp_path / "b")])
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_seed_override(tmp_path, config):
    from radcal.config import RunConfig
    path = tmp_path / "noisy.json"
    write_run_config(RunConfig(small_config(config, {("sensor", "noise_sigma"): 5e-4})), path)
    for name, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        cli.main(["calibrate", "--config", str(path), "--out", str(tmp_path / name), "--seed", seed])
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    assert tree(tmp_path / "a") != tree(tmp_path / "c")


def test_crossmat_in_window_cells_on_bundled_fixture(tmp_path):
    from importlib import resources
    path = resources.files("radcal").joinpath("data/default_config.json")
    assert cli.main(["crossmat", "--config", str(path), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "crossmat_summary.json").read_text())
    for band, entry in summary.items():
        assert entry["in_window_max_mape"] < (10.0 if band == "rededge" else 5.0)


def test_calibrate_identity_distortion(tmp_path, cfg_path):
    assert cli.main(["calibrate", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "calibration.json").read_text())
    for band, entry in report.items():
        assert entry["line"]["slope"] == pytest.approx(1.0, abs=5e-3)
        assert entry["line"]["intercept"] == pytest.approx(0.0, abs=2e-3)
        img = np.load(tmp_path / f"reflectance_{band}.npy")
        assert img.shape == (72, 132)


def test_simulate_outputs_readable_captures(tmp_path, cfg_path):
    from radcal.io import read_raw_image
    cli.main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path)])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert len(manifest["files"]) == 2 * 2 * 10 * 2
    img = read_raw_image(tmp_path / manifest["files"][0])
    assert img.meta.object_category == "crp"


def test_sweep_outputs(tmp_path, cfg_path):
    cli.main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path)])
    header = (tmp_path / "sweep_nir.csv").read_text().splitlines()[0]
    assert header.startswith("band,gain,exposure_ms,region,estimate,clip_fraction")
    windows = json.loads((tmp_path / "windows.json").read_text())["windows"]
    assert {(w["band"], w["gain"], w["mode"]) for w in windows} == {
        (b, g, m) for b in ("rededge", "nir") for g in (1.0, 2.0) for m in ("full_scale", "object_based")}


def test_vi_outputs(tmp_path, cfg_path):
    cli.main(["vi", "--config", str(cfg_path), "--out", str(tmp_path)])
    lines = (tmp_path / "plots_NDRE.csv").read_text().splitlines()
    assert lines[0] == "plot_id,vi_kind,mean,n_pixels" and len(lines) == 13
    reg = json.loads((tmp_path / "vi_regression.json").read_text())
    assert reg["vi_kind"] == "NDRE" and 0 <= reg["p_value"] <= 1


def test_report(tmp_path, cfg_path):
    cli.main(["report", "--config", str(cfg_path), "--out", str(tmp_path)])
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["bands"]) == {"rededge", "nir"}
    assert report["vi"]["vi_kind"] == "NDRE"


def test_report_skips_index_without_its_bands(tmp_path, config):
    from radcal.config import RunConfig
    doc = small_config(config)
    doc["bands"] = ["nir"]
    path = tmp_path / "c.json"
    write_run_config(RunConfig(doc), path)
    cli.main(["report", "--config", str(path), "--out", str(tmp_path / "o")])
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert "rededge" in report["vi"]["skipped"]
