import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import relaxlab
from relaxlab.errors import ConfigError
from relaxlab.experiments import REGISTRY
from relaxlab.tools.catalogue import DATA_DIR, experiment_names, find_experiment, load_catalogue, sample_config
from relaxlab.tools.io import dumps, member_dir, read_json, resolve_out_dir, write_csv, write_json


def test_out_dir_precedence(monkeypatch):
    monkeypatch.setenv("RELAXLAB_OUT", "from-env")
    assert resolve_out_dir("flag", "configured") == Path("flag")
    assert resolve_out_dir(None, "configured") == Path("configured")
    assert resolve_out_dir(None, None) == Path("from-env")
    monkeypatch.delenv("RELAXLAB_OUT")
    assert resolve_out_dir(None, None) == Path("runs")


def test_member_dir_names_parameters_in_order(tmp_path):
    assert member_dir(tmp_path, ordering="modified", mu=100.0) == tmp_path / "mu=100,ordering=modified"
    assert member_dir(tmp_path, mu=math.inf).name == "mu=infinite"
    assert member_dir(tmp_path, n_coarse=50, epsilon=0.0025).name == "epsilon=0.0025,n_coarse=50"


def test_json_is_sorted_and_stable(tmp_path):
    payload = {"b": np.float64(0.1), "a": [np.int64(3), 1.0], "path": tmp_path}
    text = dumps(payload)
    assert text.index(b'"a"') < text.index(b'"b"')
    assert text.endswith(b"\n")
    written = write_json(payload, tmp_path / "nested" / "out.json")
    assert read_json(written) == {"a": [3, 1.0], "b": 0.1, "path": str(tmp_path)}
    with pytest.raises(TypeError):
        dumps({"bad": object()})


def test_csv_keeps_full_precision(tmp_path):
    frame = pd.DataFrame({"x": [0.1, 1.0 / 3.0], "u": [2.0 / 3.0, 1e-17]})
    path = write_csv(frame, tmp_path / "sub" / "f.csv")
    back = pd.read_csv(path, float_precision="round_trip")
    assert back["x"].tolist() == frame["x"].tolist()
    assert back["u"].tolist() == frame["u"].tolist()
    write_csv(frame, tmp_path / "again.csv")
    assert path.read_bytes() == (tmp_path / "again.csv").read_bytes()


def test_catalogue_matches_the_registry():
    assert len(load_catalogue()) == 9
    assert sorted(experiment_names()) == sorted(REGISTRY)
    for entry in load_catalogue():
        assert {"name", "description", "anchor", "config"} <= set(entry)
        assert sample_config(entry["name"]).is_file()


def test_catalogue_ships_inside_the_package():
    assert DATA_DIR.parent == Path(relaxlab.__file__).resolve().parent
    assert (DATA_DIR / "experiments.json").is_file()


def test_find_experiment():
    assert find_experiment("Layer-Demo")["name"] == "layer-demo"
    with pytest.raises(ConfigError) as info:
        find_experiment("warp-drive")
    assert info.value.path == "$.name"
