import orjson
import pandas as pd
import pytest
from click.testing import CliRunner

from relaxlab.cli import cli
from relaxlab.config import load_config, parse_config
from relaxlab.experiments import run_experiment
from relaxlab.tools.catalogue import DATA_DIR, sample_config
from relaxlab.tools.io import read_json

LAYER_DEMO = {
    "name": "layer-demo",
    "model": {"isotherm": {"kind": "langmuir", "beta": 1.0}},
    "grid": {"n_coarse": 10, "refine": 4},
    "scheme": {"mu": 10, "dt": 0.05, "horizon": 0.05},
    "initial_data": {"kind": "layer_demo"},
    "outputs": {"snapshots": [0.05]},
}


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_bytes(orjson.dumps(payload))
    return path


def splitting_order(nu):
    return {
        "name": "splitting-order",
        "model": {"isotherm": {"kind": "langmuir", "beta": 4.0}},
        "grid": {"n_coarse": 10, "refine": 1},
        "scheme": {"mu": 100, "nu": nu, "dt": 0.1, "horizon": 0.2},
    }


def test_list_experiments():
    result = CliRunner().invoke(cli, ["list-experiments"])
    assert result.exit_code == 0
    names = [line.split()[0] for line in result.output.splitlines()]
    assert names[0] == "layer-demo"
    assert "mollified-validation" in names and len(names) == 9


def test_layer_demo_run_writes_its_files(tmp_path):
    config = write_config(tmp_path, LAYER_DEMO)
    out = tmp_path / "out"
    result = CliRunner().invoke(cli, ["run", "--config", str(config), "--out", str(out), "--quiet"])
    assert result.exit_code == 0

    run_dir = out / "layer-demo"
    for name in ("manifest.json", "diagnostics.json", "metrics.json", "run.csv", "fields_0001_pre_event.csv", "fields_final.csv"):
        assert (run_dir / name).is_file()
    manifest = read_json(run_dir / "manifest.json")
    assert manifest["experiment"]["name"] == "layer-demo"
    assert manifest["config"]["scheme"]["dt"] == 0.05
    diagnostics = read_json(run_dir / "diagnostics.json")
    assert all(check["pass"] for check in diagnostics.values())
    assert read_json(run_dir / "metrics.json")["layer_jump"] > 0
    frame = pd.read_csv(run_dir / "run.csv")
    assert list(frame["phase"]) == ["initial", "pre_event", "post_event"]


def test_runs_are_byte_identical(tmp_path):
    cfg = parse_config(orjson.dumps(LAYER_DEMO))
    assert run_experiment(cfg, out=str(tmp_path / "a")) == 0
    assert run_experiment(cfg, out=str(tmp_path / "b")) == 0
    for name in ("run.csv", "diagnostics.json", "metrics.json", "manifest.json", "fields_final.csv"):
        assert (tmp_path / "a" / "layer-demo" / name).read_bytes() == (tmp_path / "b" / "layer-demo" / name).read_bytes()


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RELAXLAB_OUT", str(tmp_path / "env"))
    assert run_experiment(parse_config(orjson.dumps(LAYER_DEMO))) == 0
    assert (tmp_path / "env" / "layer-demo" / "run.csv").is_file()


def test_bad_config_exits_with_one(tmp_path):
    config = tmp_path / "broken.json"
    config.write_text("{")
    result = CliRunner().invoke(cli, ["run", "--config", str(config), "--out", str(tmp_path)])
    assert result.exit_code == 1

    payload = dict(LAYER_DEMO, scheme={"dt": 0.3, "horizon": 1.0})
    result = CliRunner().invoke(cli, ["run", "--config", str(write_config(tmp_path, payload)), "--out", str(tmp_path)])
    assert result.exit_code == 1


def test_runtime_error_exits_with_one(tmp_path):
    (tmp_path / "init.csv").write_text("x,u\n0.5,0.1\n")
    payload = dict(LAYER_DEMO, initial_data={"kind": "custom_csv", "path": "init.csv"})
    result = CliRunner().invoke(cli, ["run", "--config", str(write_config(tmp_path, payload)), "--out", str(tmp_path / "out")])
    assert result.exit_code == 1


def test_orderings_agree_without_subcells(tmp_path):
    cfg = parse_config(orjson.dumps(splitting_order("infinite")))
    assert run_experiment(cfg, out=str(tmp_path)) == 0
    diagnostics = read_json(tmp_path / "splitting-order" / "diagnostics.json")
    assert diagnostics["orderings_identical"]["max_violation"] == 0.0
    assert (tmp_path / "splitting-order" / "ordering=modified" / "run.csv").is_file()


def test_failed_check_exits_with_two(tmp_path):
    # one fine cell per coarse cell: P^h is the identity, so the orderings cannot differ
    config = write_config(tmp_path, splitting_order(10))
    result = CliRunner().invoke(cli, ["run", "--config", str(config), "--out", str(tmp_path / "out")])
    assert result.exit_code == 2
    diagnostics = read_json(tmp_path / "out" / "splitting-order" / "diagnostics.json")
    assert diagnostics["ordering_distance"]["pass"] is False


def test_contraction_runs_in_parallel(tmp_path):
    payload = {
        "name": "contraction",
        "grid": {"n_coarse": 10, "refine": 2},
        "scheme": {"mu": 10, "horizon": 0.2},
        "sweeps": {"mu": [10, "infinite"], "pairs": 2},
    }
    config = write_config(tmp_path, payload)
    result = CliRunner().invoke(cli, ["run", "--config", str(config), "--out", str(tmp_path), "--parallel", "2", "-q"])
    assert result.exit_code == 0
    frame = pd.read_csv(tmp_path / "contraction" / "distances.csv")
    # 2 pairs x 2 orderings x 2 strengths, 1 + 2 rows per event
    assert len(frame) == 8 * (1 + 2 * 2)
    assert read_json(tmp_path / "contraction" / "diagnostics.json")["distances_nonincreasing"]["pass"]


@pytest.mark.parametrize(
    "filename",
    [
        "layer-demo.json",
        "splitting-order.json",
        "splitting-order-m1.json",
        "relax-mass.json",
        "mollified-validation.json",
        "contraction.json",
    ],
)
def test_shipped_desk_configs_pass(filename, tmp_path):
    cfg = load_config(DATA_DIR / "configs" / filename)
    assert run_experiment(cfg, out=str(tmp_path)) == 0


def test_shipped_splitting_order_separates_the_orderings(tmp_path):
    cfg = load_config(sample_config("splitting-order"))
    scheme = cfg.build_scheme()
    assert cfg.grid.refine == 8
    assert scheme.mu.rate(scheme.dt) == pytest.approx(50.0)

    assert run_experiment(cfg, out=str(tmp_path)) == 0
    diagnostics = read_json(tmp_path / "splitting-order" / "diagnostics.json")
    assert diagnostics["ordering_distance"]["pass"]
    assert read_json(tmp_path / "splitting-order" / "metrics.json")["ordering_distance"] > 1e-3
