# Writers for everything an experiment leaves on disk.
# CSV through pandas at 17 significant digits, JSON through orjson with sorted
# keys, so two runs of the same config produce byte-identical files.

import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
import orjson
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
DEFAULT_OUT = "runs"
OUT_ENV = "RELAXLAB_OUT"


def resolve_out_dir(flag: Optional[str], configured: Optional[str]) -> Path:
    """--out flag, then the config's outputs.directory, then $RELAXLAB_OUT, then ./runs."""
    for candidate in (flag, configured, os.getenv(OUT_ENV)):
        if candidate:
            return Path(candidate)
    return Path(DEFAULT_OUT)


def member_dir(parent: Path, **params: Any) -> Path:
    """Sub-directory of one sweep member, named by its sorted parameters."""
    name = ",".join(f"{key}={_label(params[key])}" for key in sorted(params))
    return parent / name


def _label(value: Any) -> str:
    if isinstance(value, float):
        return "infinite" if np.isinf(value) else format(value, ".10g")
    return str(value)


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def _default(obj: Any):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(payload: Mapping[str, Any]) -> bytes:
    return orjson.dumps(payload, default=_default, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2) + b"\n"


def write_json(payload: Mapping[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(payload))
    logger.debug("wrote %s", path)
    return path


def read_json(path: Path) -> Any:
    return orjson.loads(Path(path).read_bytes())
