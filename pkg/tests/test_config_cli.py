import json
from pathlib import Path

import numpy as np
import pytest
import yaml

import roadsim
from oracles import angular_error
from roadsim.cli import run_cli
from roadsim.config import (DatasetConfig, SceneConfig, dump_config, load_config, load_scene,
                            parse_config)
from roadsim.errors import ConfigurationError
from roadsim.wavio import wav_read, wav_write

DATA = Path(roadsim.__file__).parent / "data"
SQUARE = [[0.05, 0.05, 1.0], [-0.05, 0.05, 1.0], [-0.05, -0.05, 1.0], [0.05, -0.05, 1.0]]


def small_scene(**over):
    cfg = {
        "fs": 8000, "seed": 3,
        "source": {"signal": {"kind": "noise", "duration": 0.5},
                   "trajectory": {"kind": "static", "waypoints": [[10.0, 2.0, 1.5]]}},
        "microphones": [[0.0, 0.0, 1.0], [0.1, 0.0, 1.0]],
    }
    cfg.update(over)
    return cfg


# -- configuration ----------------------------------------------------------

def test_unknown_field_is_rejected_with_its_path():
    cfg = small_scene()
    cfg["source"]["trajectory"]["colour"] = "red"
    with pytest.raises(ConfigurationError, match=r"source\.trajectory\.colour"):
        parse_config(SceneConfig, yaml.safe_dump(cfg))


def test_invalid_values_are_reported():
    with pytest.raises(ConfigurationError, match="fs"):
        parse_config(SceneConfig, yaml.safe_dump(small_scene(fs=-1)))
    with pytest.raises(ConfigurationError, match="microphones"):
        parse_config(SceneConfig, yaml.safe_dump(small_scene(microphones=[[0, 0, -1.0]])))
    with pytest.raises(ConfigurationError, match="mapping"):
        parse_config(SceneConfig, "- 1\n- 2\n")
    with pytest.raises(ConfigurationError, match="YAML"):
        parse_config(SceneConfig, "fs: [1, 2\n")


def test_round_trip_yields_identical_scene():
    a = load_config(SceneConfig, DATA / "passby_scene.yaml")
    b = parse_config(SceneConfig, dump_config(a))
    assert a == b
    assert a.to_scene() == b.to_scene()


def test_file_signal_resolves_relative_to_config(tmp_path):
    (tmp_path / "clips").mkdir()
    wav_write(tmp_path / "clips" / "x.wav", 0.1 * np.ones(4000), 8000, "float32")
    cfg = small_scene()
    cfg["source"]["signal"] = {"kind": "file", "path": "clips/x.wav"}
    (tmp_path / "scene.yaml").write_text(yaml.safe_dump(cfg))
    scene = load_scene(tmp_path / "scene.yaml")
    assert scene.n_samples == 4000
    cfg["source"]["signal"]["path"] = "clips/missing.wav"
    (tmp_path / "bad.yaml").write_text(yaml.safe_dump(cfg))
    with pytest.raises(ConfigurationError, match="missing.wav"):
        load_scene(tmp_path / "bad.yaml")


def test_bundled_dataset_config_loads():
    cfg = load_config(DatasetConfig, DATA / "siren_dataset.yaml")
    spec = cfg.model_copy(update={"count": 3}).to_spec(DATA)
    assert spec.count == 3 and sorted(spec.classes) == ["hi-low", "wail", "yelp"]


# -- command line -------------------------------------------------------------

def test_render_bundled_scene(tmp_path):
    out, gt = tmp_path / "out.wav", tmp_path / "gt.jsonl"
    assert run_cli(["render", "--scene", str(DATA / "passby_scene.yaml"), "--out", str(out),
                    "--ground-truth", str(gt)]) == 0
    audio, fs = wav_read(out)
    assert fs == 16000 and audio.shape == (4, 48000)
    rows = [json.loads(line) for line in gt.read_text().splitlines()]
    assert len(rows) == 30 and {"time", "array_azimuth"} <= rows[0].keys()


def test_localize_reports_rendered_direction(tmp_path):
    az = np.radians(45.0)
    src = [float(50 * np.cos(az)), float(50 * np.sin(az)), 1.0]
    scene = small_scene(fs=16000, microphones=SQUARE, reflection={"enabled": False},
                        air_absorption={"enabled": False})
    scene["source"]["trajectory"]["waypoints"] = [src]
    (tmp_path / "scene.yaml").write_text(yaml.safe_dump(scene))
    (tmp_path / "array.yaml").write_text(yaml.safe_dump({"microphones": SQUARE}))
    assert run_cli(["render", "--scene", str(tmp_path / "scene.yaml"),
                    "--out", str(tmp_path / "rec.wav")]) == 0
    assert run_cli(["localize", "--in", str(tmp_path / "rec.wav"), "--array",
                    str(tmp_path / "array.yaml"), "--grid-step", "5",
                    "--out", str(tmp_path / "doa.jsonl")]) == 0
    rows = [json.loads(line) for line in (tmp_path / "doa.jsonl").read_text().splitlines()]
    # skip frames before the direct sound has arrived (50 m takes 0.146 s)
    late = [r for r in rows if r["time"] > 0.2]
    assert late
    assert all(angular_error(r["azimuth"], 45.0) <= 5.0 for r in late)


def test_dataset_runs_are_byte_identical(tmp_path):
    spec = str(DATA / "siren_dataset.yaml")
    for name in ("a", "b"):
        assert run_cli(["dataset", "--spec", spec, "--out-dir", str(tmp_path / name),
                        "--count", "5"]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*")
                   if p.is_file())
    assert len(files) == 6
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_override_changes_dataset(tmp_path):
    spec = str(DATA / "siren_dataset.yaml")
    for name, seed in (("a", "1"), ("b", "2")):
        assert run_cli(["dataset", "--spec", spec, "--out-dir", str(tmp_path / name),
                        "--count", "20", "--dry-run", "--seed", seed]) == 0
    a = (tmp_path / "a" / "manifest.jsonl").read_text()
    b = (tmp_path / "b" / "manifest.jsonl").read_text()
    assert a != b and len(a.splitlines()) == 20


def test_profile_writes_report(tmp_path):
    (tmp_path / "scene.yaml").write_text(yaml.safe_dump(small_scene()))
    assert run_cli(["profile", "--scene", str(tmp_path / "scene.yaml"), "--frames", "3",
                    "--directions", "50", "--out", str(tmp_path / "r.json")]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["frames"] == 3 and "srp_map" in report["stages"]


def test_exit_codes(tmp_path, capsys):
    assert run_cli(["render", "--bogus"]) == 2
    assert run_cli([]) == 2
    assert run_cli(["render", "--scene", str(tmp_path / "nope.yaml"),
                    "--out", str(tmp_path / "o.wav")]) == 1
    err = capsys.readouterr().err
    assert "roadsim render: error" in err and "nope.yaml" in err
    assert run_cli(["localize", "--in", str(tmp_path / "x.wav"), "--array", "a.yaml",
                    "--grid-step", "0", "--out", "o"]) == 2


def test_channel_mismatch_is_a_runtime_error(tmp_path, capsys):
    wav_write(tmp_path / "rec.wav", np.zeros((3, 1024)), 16000)
    (tmp_path / "array.yaml").write_text(yaml.safe_dump({"microphones": SQUARE}))
    assert run_cli(["localize", "--in", str(tmp_path / "rec.wav"), "--array",
                    str(tmp_path / "array.yaml"), "--out", str(tmp_path / "d.jsonl")]) == 1
    assert "3 channels" in capsys.readouterr().err
