import json

import pytest

from stentropy.cli import run


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    code = run(["synth", "--out-dir", str(out), "--seed", "5",
                "--set", "synth.users_per_profile=10", "--set", "synth.days=6"])
    assert code == 0
    return out


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_synth_outputs(bench):
    assert {"traces.csv", "demographics.csv", "config.cfg", "config.resolved.cfg"} <= set(_files(bench))
    cfg = (bench / "config.cfg").read_text()
    assert "grid.min_lat = 46.5" in cfg


def test_missing_config_is_usage_error(capsys):
    assert run(["evaluate"]) == 1
    assert "--config" in capsys.readouterr().err


def test_no_command():
    assert run([]) == 1


def test_unknown_option():
    assert run(["entropy", "--config", "x", "--bogus"]) == 1


def test_missing_config_file(tmp_path, capsys):
    assert run(["entropy", "--config", str(tmp_path / "nope.cfg")]) == 2
    assert "config" in capsys.readouterr().err


def test_bad_key_in_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("grid.bogus = 1\n")
    assert run(["entropy", "--config", str(cfg)]) == 2


def test_help_lists_keys(capsys):
    assert run(["evaluate", "--help"]) == 0
    out = capsys.readouterr().out
    assert "gam.lambda_grid_log10" in out and "entropy.max_gap_seconds" in out


def test_entropy_export(bench, tmp_path):
    out = tmp_path / "e"
    assert run(["entropy", "--config", str(bench / "config.cfg"), "--out-dir", str(out)]) == 0
    lines = (out / "entropy.csv").read_text().splitlines()
    assert lines[0] == "user_id,slice_index,slice_start_iso,entropy_pct"
    assert len(lines) == 1 + 20 * 6
    assert lines[1].startswith("u0000,0,2009-01-05T00:00:00Z,")


def test_features_export(bench, tmp_path):
    out = tmp_path / "f"
    assert run(["features", "--config", str(bench / "config.cfg"), "--out-dir", str(out),
                "--target", "gender"]) == 0
    lines = (out / "features_gender.csv").read_text().splitlines()
    assert lines[0] == "user_id,slice_index,entropy,max_distance_km,day_of_week,label"
    assert len(lines) == 1 + 20 * 6


def test_evaluate_is_byte_identical(bench, tmp_path, capsys):
    dirs = [tmp_path / "r1", tmp_path / "r2"]
    for d in dirs:
        assert run(["evaluate", "--config", str(bench / "config.cfg"), "--out-dir", str(d),
                    "--target", "working_profile", "--seed", "42"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("target=working_profile accuracy=")
    assert out.splitlines()[0].endswith("n_test=2 seed=42")
    a, b = _files(dirs[0]), _files(dirs[1])
    assert set(a) == set(b)
    for name in a:
        if name != "config.resolved.cfg":
            assert a[name] == b[name], name
    report = json.loads((dirs[0] / "report_working_profile.json").read_text())
    assert report["seed"] == 42 and report["n_test_users"] == 2


def test_repeats(bench, tmp_path, capsys):
    assert run(["evaluate", "--config", str(bench / "config.cfg"), "--out-dir", str(tmp_path),
                "--target", "gender", "--repeats", "2"]) == 0
    assert (tmp_path / "report_gender_seed6.json").exists()
    assert "mean_accuracy=" in capsys.readouterr().out


def test_train_then_predict(bench, tmp_path):
    cfg = str(bench / "config.cfg")
    assert run(["train", "--config", cfg, "--out-dir", str(tmp_path), "--target", "gender"]) == 0
    assert run(["predict", "--config", cfg, "--out-dir", str(tmp_path), "--target", "gender"]) == 0
    lines = (tmp_path / "predictions_gender.csv").read_text().splitlines()
    assert lines[0] == "user_id,predicted,slice_count,p_Female,p_Male"
    assert len(lines) == 21
    demo = dict(l.split(",")[:2] for l in (bench / "demographics.csv").read_text().splitlines()[1:])
    hits = sum(demo[l.split(",")[0]] == {"Female": "female", "Male": "male"}[l.split(",")[1]]
               for l in lines[1:])
    assert hits >= 18


def test_predict_with_wrong_model(bench, tmp_path):
    cfg = str(bench / "config.cfg")
    assert run(["train", "--config", cfg, "--out-dir", str(tmp_path), "--target", "gender"]) == 0
    code = run(["predict", "--config", cfg, "--out-dir", str(tmp_path), "--target", "age_group",
                "--model", str(tmp_path / "model_gender.txt")])
    assert code == 2


def test_malformed_traces_exit_2(tmp_path):
    (tmp_path / "t.csv").write_text("user_id,timestamp,latitude,longitude\nu,x,1,2\n")
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"io.traces = {tmp_path / 't.csv'}\n")
    assert run(["entropy", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2
