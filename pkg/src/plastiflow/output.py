"""Artifact emission: atomic writes, CSV formats, manifests.

All real numbers are written with 17 significant digits so CSV round-trips
are exact; files are written to a temporary name and renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dpp import DppTable
from .evolve import Solution
from .grids import GridFunction


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


def atomic_write_text(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def write_grid_function(path: Path, gf: GridFunction):
    atomic_write_text(path, gf.to_csv())


def solution_series_csv(sol: Solution) -> str:
    lines = ["t,sup_norm,inf,projection_phi,sign_pattern"]
    for t, s, i, p, pat in zip(sol.times, sol.sup_norms, sol.infs,
                               sol.projections, sol.sign_patterns):
        lines.append(f"{fmt(t)},{fmt(s)},{fmt(i)},{fmt(p)},{pat}")
    return "\n".join(lines) + "\n"


def write_solution(sol: Solution, directory: Path, snapshot_cap: int = 40) -> list[str]:
    """series.csv plus up to snapshot_cap evenly spaced snapshot CSVs."""
    directory = Path(directory)
    artifacts = []
    series = directory / "series.csv"
    atomic_write_text(series, solution_series_csv(sol))
    artifacts.append(series.name)
    count = len(sol.times)
    picks = np.unique(np.linspace(0, count - 1, min(snapshot_cap, count)).astype(int))
    for rank, idx in enumerate(picks):
        gf = sol.snapshot_at_index(int(idx))
        name = f"snapshot_{rank:04d}.csv"
        atomic_write_text(directory / name, gf.to_csv())
        artifacts.append(name)
    return artifacts


def write_dpp_table(table: DppTable, directory: Path, slab_cap: int = 24) -> list[str]:
    """Manifest JSON plus a spread of value slabs as CSV."""
    directory = Path(directory)
    artifacts = []
    cfg = table.config
    dom = cfg.domain
    meta = {
        "epsilon": cfg.epsilon,
        "C": cfg.big_c,
        "K": cfg.k_samples,
        "delta_t": cfg.delta_t,
        "b_minus": cfg.params.b_minus,
        "b_plus": cfg.params.b_plus,
        "domain": {"kind": type(dom.kind).__name__.lower(),
                   "h": dom.h, "shape": list(dom.shape)},
        "n_slabs": int(table.times.size),
        "t_first": float(table.times[0]),
        "t_last": float(table.times[-1]),
        "collar_nodes": table.grid.m,
    }
    meta_path = directory / "table.json"
    atomic_write_text(meta_path, canonical_json(meta) + "\n")
    artifacts.append(meta_path.name)
    picks = np.unique(np.linspace(0, table.times.size - 1,
                                  min(slab_cap, table.times.size)).astype(int))
    x = table.grid.axes[0]
    for rank, idx in enumerate(picks):
        slab = table.values[int(idx)]
        lines = [f"# t={fmt(table.times[int(idx)])}", "x,value"]
        if slab.ndim == 1:
            for xi, vi in zip(x, slab):
                lines.append(f"{fmt(xi)},{fmt(vi)}")
        else:
            lines[1] = "x,y,value"
            y = table.grid.axes[1]
            for i, xi in enumerate(x):
                for j, yj in enumerate(y):
                    lines.append(f"{fmt(xi)},{fmt(yj)},{fmt(slab[i, j])}")
        name = f"slab_{rank:04d}.csv"
        atomic_write_text(directory / name, "\n".join(lines) + "\n")
        artifacts.append(name)
    return artifacts


def write_manifest(directory: Path, cfg_dict: dict, artifacts: list[str],
                   wall_time: float, extra: dict | None = None):
    import numpy
    from . import __version__
    manifest = {
        "config_hash": config_hash(cfg_dict),
        "artifacts": sorted(artifacts),
        "wall_time_s": wall_time,
        "versions": {"plastiflow": __version__, "numpy": numpy.__version__},
    }
    if extra:
        manifest.update(extra)
    atomic_write_text(Path(directory) / "manifest.json",
                      json.dumps(manifest, sort_keys=True, indent=1) + "\n")
