"""Result serialization: CSV tables with JSON sidecars, written atomically."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ScenarioConfig, dump_config
from .errors import NumericsError, OutputError


def _format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            raise NumericsError("non-finite value in result table")
        return repr(value)           # shortest exact round-trip
    return str(value)


def write_results(
    path,
    header,
    rows,
    config: ScenarioConfig | None = None,
    sidecar: dict | None = None,
) -> Path:
    """Write a CSV table plus a JSON sidecar next to it.

    The CSV is deterministic (row order preserved, repr floats, LF endings)
    and written via a temporary file so failures never leave partial output.
    A NaN anywhere aborts before any file is touched.
    """
    path = Path(path)
    header = list(header)
    formatted = []
    for row in rows:
        if len(row) != len(header):
            raise OutputError(f"row width {len(row)} does not match header {len(header)}")
        formatted.append([_format_value(v) for v in row])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(formatted)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"failed to write {path}: {exc}") from exc

    meta = dict(sidecar or {})
    meta.setdefault("created_unix", time.time())
    meta["rows"] = len(formatted)
    meta["columns"] = header
    meta["versions"] = {
        "rydarray": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    if config is not None:
        text = dump_config(config)
        meta["config"] = yaml_echo(text)
        meta["config_sha256"] = hashlib.sha256(text.encode()).hexdigest()
    sidecar_path = path.with_suffix(".json")
    try:
        tmp = sidecar_path.with_name(sidecar_path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as handle:
            json.dump(meta, handle, indent=2, sort_keys=True, default=str)
            handle.write("\n")
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, sidecar_path)
    except OSError as exc:
        raise OutputError(f"failed to write {sidecar_path}: {exc}") from exc
    return path


def yaml_echo(text: str):
    import yaml

    return yaml.safe_load(text)


def write_trajectory_log(path, records) -> Path:
    """Line-delimited JSON log of quantum-jump trajectory records."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as handle:
            for rec in records:
                handle.write(json.dumps({
                    "master_seed": rec.master_seed,
                    "index": rec.index,
                    "duration": rec.duration,
                    "jump_times": [float(t) for t in rec.jump_times],
                    "jump_channels": [int(c) for c in rec.jump_channels],
                    "sample_times": [float(t) for t in rec.sample_times],
                    "observables": {
                        k: [float(v) for v in vals]
                        for k, vals in rec.observables.items()
                    },
                }, sort_keys=True))
                handle.write("\n")
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"failed to write {path}: {exc}") from exc
    return path
