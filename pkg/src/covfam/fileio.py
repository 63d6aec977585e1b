"""On-disk formats: factor files and grid manifests.

A factor file is a JSON manifest next to a raw binary blob. The manifest
(`X.json`) carries the shape and an optional label; the blob (`X.bin`)
holds n*r little-endian float64 values in column-major order, so writing
then reading reproduces the in-memory array bit for bit. A grid manifest
(schema covfam-grid/1) lists the anchor factor files of a labelled grid
together with the affine label map.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .covfun import AnchorGrid
from .manifold import FactorPoint
from .numerics import as_matrix

__all__ = [
    "FACTOR_SCHEMA",
    "GRID_SCHEMA",
    "factor_paths",
    "write_factor",
    "read_factor",
    "write_grid",
    "read_grid",
]

FACTOR_SCHEMA = "covfam-factor/1"
GRID_SCHEMA = "covfam-grid/1"


def factor_paths(path) -> tuple[Path, Path]:
    """Manifest and blob paths for a factor file, from either one."""
    p = Path(path)
    if p.suffix == ".bin":
        return p.with_suffix(".json"), p
    if p.suffix == ".json":
        return p, p.with_suffix(".bin")
    return p.with_suffix(p.suffix + ".json"), p.with_suffix(p.suffix + ".bin")


def write_factor(path, y, label: tuple[float, float] | None = None) -> Path:
    """Write a factor as manifest + blob; returns the manifest path."""
    y = as_matrix(y, "factor")
    manifest_path, blob_path = factor_paths(path)
    n, r = y.shape
    manifest = {
        "schema": FACTOR_SCHEMA,
        "n": n,
        "r": r,
        "dtype": "f64le",
        "layout": "col-major",
    }
    if label is not None:
        manifest["label"] = {"theta": float(label[0]), "w": float(label[1])}
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    blob_path.write_bytes(np.ascontiguousarray(y.flatten(order="F"), dtype="<f8").tobytes())
    return manifest_path


def read_factor(path) -> tuple[np.ndarray, dict | None]:
    """Read a factor file; the manifest is parsed before the blob is touched."""
    manifest_path, blob_path = factor_paths(path)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema") != FACTOR_SCHEMA:
        raise ValueError(f"{manifest_path}: unsupported schema {manifest.get('schema')!r}")
    if manifest.get("dtype") != "f64le" or manifest.get("layout") != "col-major":
        raise ValueError(f"{manifest_path}: unsupported dtype/layout")
    n, r = int(manifest["n"]), int(manifest["r"])
    blob = blob_path.read_bytes()
    if len(blob) != 8 * n * r:
        raise ValueError(
            f"{blob_path}: expected {8 * n * r} bytes for a {n}x{r} factor, got {len(blob)}"
        )
    y = np.frombuffer(blob, dtype="<f8").astype(np.float64).reshape((n, r), order="F")
    return y, manifest.get("label")


def write_grid(out_dir, grid: AnchorGrid) -> Path:
    """Write a grid manifest plus one factor file per anchor."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(grid.nodes1):
        for j in range(grid.nodes2):
            theta, w = grid.label_of(i, j)
            name = f"anchor_{i}_{j}.json"
            write_factor(out / name, grid.anchors[i][j].y, label=(theta, w))
            entries.append({"i": i, "j": j, "theta": theta, "w": w, "path": name})
    lmap = grid.label_map
    manifest = {
        "schema": GRID_SCHEMA,
        "shape": [grid.nodes1, grid.nodes2],
        "anchors": entries,
        "label_map": {
            "theta0": lmap.theta0,
            "theta_step": lmap.theta_step,
            "w0": lmap.w0,
            "w_step": lmap.w_step,
        },
    }
    manifest_path = out / "grid.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def read_grid(manifest_path) -> AnchorGrid:
    """Load a grid manifest and every anchor factor it references."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema") != GRID_SCHEMA:
        raise ValueError(f"{manifest_path}: unsupported schema {manifest.get('schema')!r}")
    nodes1, nodes2 = (int(v) for v in manifest["shape"])
    entries = manifest["anchors"]
    if len(entries) != nodes1 * nodes2:
        raise ValueError(f"{manifest_path}: expected {nodes1 * nodes2} anchors, got {len(entries)}")
    seen = set()
    anchors: list[list[FactorPoint | None]] = [[None] * nodes2 for _ in range(nodes1)]
    thetas = np.full(nodes1, np.nan)
    ws = np.full(nodes2, np.nan)
    base = manifest_path.parent
    for entry in entries:
        i, j = int(entry["i"]), int(entry["j"])
        if not (0 <= i < nodes1 and 0 <= j < nodes2) or (i, j) in seen:
            raise ValueError(f"{manifest_path}: bad or duplicate anchor index ({i},{j})")
        seen.add((i, j))
        y, _ = read_factor(base / entry["path"])
        anchors[i][j] = FactorPoint(y)
        thetas[i] = float(entry["theta"])
        ws[j] = float(entry["w"])
    return AnchorGrid(
        anchors=tuple(tuple(row) for row in anchors),
        thetas=thetas,
        ws=ws,
    )
