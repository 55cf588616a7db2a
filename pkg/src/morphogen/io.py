"""CSV/JSON persistence of stationary solutions.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly. Nothing time-dependent is written, so repeated runs give
byte-identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .analysis import compute_norms
from .discretization import Grid1D, Grid2D
from .model import ModelParams
from .picard import SpeciesFields, StationarySolution

__all__ = ["save_solution", "load_solution", "write_json", "fmt"]


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _write_rows(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([fmt(v) for v in row])


def save_solution(
    sol: StationarySolution,
    outdir: str | Path,
    stem: str = "solution",
    extra: dict | None = None,
) -> dict[str, Path]:
    """Write bulk CSV (2D only), boundary CSV and a JSON sidecar.

    The sidecar carries parameters, grid, solver diagnostics and the default
    (p=1.5, q=4) norm report.

    Returns the written paths keyed by role.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    s = sol.species
    paths: dict[str, Path] = {}
    if sol.is_2d:
        X1, X2 = sol.grid2.mesh()
        paths["bulk"] = outdir / f"{stem}_bulk.csv"
        _write_rows(paths["bulk"], ["x1", "x2", "u1"], [X1.ravel(), X2.ravel(), s.u1.ravel()])
        paths["boundary"] = outdir / f"{stem}_boundary.csv"
        _write_rows(paths["boundary"], ["x1", "u2", "u3", "u4", "u5"], [sol.grid1.x, s.u2, s.u3, s.u4, s.u5])
    else:
        paths["boundary"] = outdir / f"{stem}_boundary.csv"
        _write_rows(
            paths["boundary"], ["x1", "u1", "u2", "u3", "u4", "u5"], [sol.grid1.x, s.u1, s.u2, s.u3, s.u4, s.u5]
        )
    sidecar = {
        "kind": "2d" if sol.is_2d else "1d",
        "params": sol.params.to_dict(),
        "grid": sol.grid2.describe() if sol.is_2d else sol.grid1.describe(),
        "diagnostics": {
            "converged": sol.converged,
            "iterations": sol.iterations,
            "update_norm": sol.update_norm,
            "weak_residual": sol.residual,
        },
        "norms": compute_norms(sol).to_dict(),
        "files": {k: p.name for k, p in paths.items()},
    }
    if extra:
        sidecar.update(extra)
    paths["sidecar"] = outdir / f"{stem}.json"
    write_json(paths["sidecar"], sidecar)
    return paths


def _read_columns(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    return {name: data[:, i] for i, name in enumerate(header)}


def load_solution(sidecar: str | Path) -> StationarySolution:
    """Inverse of :func:`save_solution`; takes the JSON sidecar path."""
    sidecar = Path(sidecar)
    meta = json.loads(sidecar.read_text())
    params = ModelParams.from_dict(meta["params"])
    files = meta["files"]
    boundary = _read_columns(sidecar.parent / files["boundary"])
    grid1 = Grid1D(meta["grid"]["n1"])
    if meta["kind"] == "2d":
        grid2 = Grid2D(meta["grid"]["n1"], meta["grid"]["n2"])
        bulk = _read_columns(sidecar.parent / files["bulk"])
        if len(bulk["u1"]) != grid2.size:
            raise ValueError("bulk CSV row count does not match the grid")
        u1 = bulk["u1"].reshape(grid2.n1, grid2.n2)
    else:
        grid2 = None
        u1 = boundary["u1"]
    if len(boundary["u2"]) != grid1.n1:
        raise ValueError("boundary CSV row count does not match the grid")
    diag = meta["diagnostics"]
    return StationarySolution(
        species=SpeciesFields(u1, boundary["u2"], boundary["u3"], boundary["u4"], boundary["u5"]),
        params=params,
        grid1=grid1,
        grid2=grid2,
        iterations=diag["iterations"],
        update_norm=diag["update_norm"],
        residual=diag["weak_residual"],
        converged=diag["converged"],
    )
