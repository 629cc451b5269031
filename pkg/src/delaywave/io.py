"""Plain-text persistence: CSV tables, matrix triplets, JSON reports.

Numbers are written with ``repr`` so they round-trip exactly.

Triplet format: header line ``row,col,value`` then one line per stored
nonzero, 0-based indices, rows in CSR order.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

RESOLVENT_HEADER = ("lambda", "sigma_min", "res_norm")
SPECTRUM_HEADER = ("re", "im")
SNAPSHOT_HEADER = ("x", "u", "v", "y", "z")
TRIPLET_HEADER = ("row", "col", "value")


def _fmt(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_triplets(path, matrix) -> Path:
    A = sp.csr_matrix(matrix)
    A.sort_indices()
    coo = A.tocoo()
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIPLET_HEADER)
        for i, j, v in zip(coo.row, coo.col, coo.data):
            w.writerow([int(i), int(j), _fmt(v)])
    return path


def read_triplets(path, shape=None) -> sp.csr_matrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRIPLET_HEADER:
            raise ValueError(f"unexpected triplet header {header}")
        rows, cols, vals = [], [], []
        for r in reader:
            rows.append(int(r[0]))
            cols.append(int(r[1]))
            vals.append(float(r[2]))
    if shape is None:
        shape = (max(rows, default=-1) + 1, max(cols, default=-1) + 1)
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


def write_resolvent_csv(path, samples) -> Path:
    return _write_rows(path, RESOLVENT_HEADER, ((s.lam, s.sigma_min, s.res_norm) for s in samples))


def write_spectrum_csv(path, eigenvalues) -> Path:
    return _write_rows(path, SPECTRUM_HEADER, ((z.real, z.imag) for z in np.asarray(eigenvalues)))


def write_snapshot_csv(path, mesh, state) -> Path:
    """Nodal ``x, u, v, y, z`` including the Dirichlet end points."""
    pad = lambda a: np.concatenate([[0.0], np.asarray(a, dtype=float), [0.0]])  # noqa: E731
    cols = [mesh.nodes, pad(state.u), pad(state.v), pad(state.y), pad(state.z)]
    return _write_rows(path, SNAPSHOT_HEADER, zip(*cols))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path
