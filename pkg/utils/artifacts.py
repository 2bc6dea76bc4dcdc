"""
Output plumbing: atomic artifact directories, CSV/YAML writers and run manifests.
"""

import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator

import pandas as pd
import yaml

from utils.logger import logger

__all__ = ["FLOAT_FORMAT", "artifact_dir", "atomic_file", "write_csv", "read_csv", "write_yaml", "read_yaml", "write_manifest"]

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.yaml"


@contextmanager
def artifact_dir(out_dir: str) -> Iterator[Path]:
    """
    Yield a temporary sibling directory; on success it replaces ``out_dir``,
    on failure it is removed so no partial output survives.
    """
    target = Path(out_dir)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if target.exists():
        shutil.rmtree(target)
    os.replace(tmp, target)
    logger.info(f"Artifacts written to {target}")


@contextmanager
def atomic_file(path: str) -> Iterator[Path]:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        yield tmp
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    os.replace(tmp, target)


def write_csv(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def read_csv(path, **kwargs) -> pd.DataFrame:
    """Read a CSV written by write_csv; floats parse back to the identical double."""
    return pd.read_csv(path, float_precision="round_trip", **kwargs)



def write_yaml(data: Dict[str, Any], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=True, allow_unicode=True)


def read_yaml(path) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def write_manifest(directory: Path, command: str, config_hash: str, seed: int, extra: Dict[str, Any] | None = None) -> None:
    """Record what produced a directory. No timestamps, so reruns are byte-identical."""
    from config import __version__

    manifest = {
        "command": command,
        "config_hash": config_hash,
        "seed": int(seed),
        "tool_version": __version__,
    }
    if extra:
        manifest.update(extra)
    write_yaml(manifest, Path(directory) / MANIFEST_NAME)
