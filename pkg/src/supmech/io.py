"""CSV and JSON writers with reproducible number formatting.

Floats in CSV are written with 17 significant digits, so values survive a
round trip exactly. JSON floats use Python's shortest round-trip repr.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .hybrid import HybridState
from .phase_space import Domain, GridFunction, PhaseSpaceGrid


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _cell_rows(grid: PhaseSpaceGrid, columns: Sequence[np.ndarray]):
    q, p = grid.mesh()
    flat = [c.reshape(-1) for c in columns]
    for i, (qq, pp) in enumerate(zip(q.reshape(-1), p.reshape(-1))):
        yield [float(qq), float(pp)] + [float(c[i]) for c in flat]


def write_grid_function(path, f: GridFunction, name: str = "value") -> Path:
    return write_csv(path, ["q", "p", name], _cell_rows(f.grid, [f.values]))


def write_domain(path, d: Domain) -> Path:
    q, p = d.grid.mesh()
    rows = ([float(a), float(b), int(m)] for a, b, m in zip(q.reshape(-1), p.reshape(-1), d.mask.reshape(-1)))
    return write_csv(path, ["q", "p", "inside"], rows)


def hybrid_header(dim: int) -> list[str]:
    cols = ["q", "p"]
    for i in range(dim):
        for j in range(dim):
            cols += [f"re_{i}{j}", f"im_{i}{j}"]
    return cols


def write_hybrid_state(path, Phi: HybridState) -> Path:
    """One row per cell: q, p, then Re/Im of every matrix entry in row-major order."""
    d = Phi.dim
    cols = []
    for i in range(d):
        for j in range(d):
            cols += [Phi.field[..., i, j].real, Phi.field[..., i, j].imag]
    return write_csv(path, hybrid_header(d), _cell_rows(Phi.grid, cols))


def read_hybrid_state(path, grid: PhaseSpaceGrid) -> HybridState:
    header, rows = read_csv(path)
    d = int(round(np.sqrt((len(header) - 2) / 2)))
    data = np.array(rows, dtype=float)[:, 2:]
    field = (data[:, 0::2] + 1j * data[:, 1::2]).reshape(grid.shape + (d, d))
    return HybridState(grid, field, check=False)


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n")
    return path


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x
