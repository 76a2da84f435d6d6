"""On-disk formats: field files, point lists, report CSV helpers.

A field on disk is a pair of files sharing a stem: `name.json` holds the
header {dim, lo, hi, n_cells} (plus an optional "meta" object), `name.bin`
holds the node values as little-endian float64 in row-major order.  Either
path may be passed to the readers and writers.

CSV files use `repr` formatting so every float round-trips exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fields import Grid, ScalarField


def _pair(path: str | Path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix == ".json":
        return p, p.with_suffix(".bin")
    if p.suffix == ".bin":
        return p.with_suffix(".json"), p
    return p.with_suffix(p.suffix + ".json"), p.with_suffix(p.suffix + ".bin")


def write_field(f: ScalarField, path: str | Path, meta: dict | None = None) -> None:
    header_path, data_path = _pair(path)
    header = {
        "dim": f.grid.dim,
        "lo": list(f.grid.lo),
        "hi": list(f.grid.hi),
        "n_cells": list(f.grid.n_cells),
    }
    if meta is not None:
        header["meta"] = meta
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    data_path.write_bytes(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(path: str | Path) -> tuple[ScalarField, dict | None]:
    header_path, data_path = _pair(path)
    if not header_path.exists() or not data_path.exists():
        raise FileNotFoundError(f"field pair {header_path} / {data_path} incomplete")
    header = json.loads(header_path.read_text())
    grid = Grid(tuple(header["lo"]), tuple(header["hi"]), tuple(header["n_cells"]))
    raw = np.frombuffer(data_path.read_bytes(), dtype="<f8")
    if raw.size != grid.n_nodes:
        raise ValueError(
            f"{data_path}: expected {grid.n_nodes} float64 values, found {raw.size}"
        )
    values = raw.reshape(grid.node_shape).astype(np.float64)
    return ScalarField(grid, values), header.get("meta")


def format_float(x: float) -> str:
    return repr(float(x))


def write_csv(path: str | Path, columns: list[str], rows: list[tuple]) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    p.write_text("\n".join(lines) + "\n")


def write_points_csv(points: np.ndarray, path: str | Path) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cols = ["x", "y", "z"][: pts.shape[1]] if pts.size else ["x", "y"]
    write_csv(path, cols, [tuple(p) for p in pts])


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    cols = lines[0].split(",")
    data = np.array(
        [[float(v) for v in line.split(",")] for line in lines[1:]], dtype=float
    )
    if data.size == 0:
        data = data.reshape(0, len(cols))
    return cols, data
