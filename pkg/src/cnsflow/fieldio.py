"""Raw field dumps: little-endian float64, row-major N x N, plus a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .field import GridSpec, ScalarField

__all__ = ["write_field", "read_field"]


def _paths(path):
    path = Path(path)
    if path.suffix in (".json", ""):
        path = path.with_suffix(".f64")
    return path, path.with_suffix(".json")


def write_field(path, f: ScalarField, name: str, t: float | None = None) -> Path:
    """Write ``f`` to ``path`` (``.f64``) and its sidecar (``.json``)."""
    raw, side = _paths(path)
    raw.parent.mkdir(parents=True, exist_ok=True)
    raw.write_bytes(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    meta = {"L": f.grid.L, "N": f.grid.N, "t": t, "name": name}
    side.write_text(json.dumps(meta, indent=1))
    return raw


def read_field(path) -> tuple[ScalarField, dict]:
    raw, side = _paths(path)
    meta = json.loads(side.read_text())
    grid = GridSpec(float(meta["L"]), int(meta["N"]))
    data = np.frombuffer(raw.read_bytes(), dtype="<f8")
    if data.size != grid.N * grid.N:
        raise ValueError(f"{raw}: expected {grid.N ** 2} values, found {data.size}")
    return ScalarField(grid, data.reshape(grid.N, grid.N).copy()), meta
