# catalogue.py

from functools import lru_cache
from pathlib import Path
from typing import Dict, List

from relaxlab.errors import ConfigError
from relaxlab.tools.io import read_json

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


@lru_cache(maxsize=1)
def load_catalogue() -> List[Dict]:
    """Loads the experiment catalogue regardless of where the script is run."""
    path = DATA_DIR / "experiments.json"
    try:
        return read_json(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"experiment catalogue not found at {path}") from exc


def experiment_names() -> List[str]:
    return [entry["name"] for entry in load_catalogue()]


def find_experiment(name: str) -> Dict:
    for entry in load_catalogue():
        if entry["name"].lower() == name.lower():
            return entry
    raise ConfigError(f"unknown experiment {name!r}; known: {', '.join(experiment_names())}", path="$.name")


def sample_config(name: str) -> Path:
    """Path of the ready-to-run config shipped for `name`."""
    return DATA_DIR / "configs" / find_experiment(name)["config"]
