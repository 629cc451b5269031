"""Breakpoint-aligned 1-D mesh and P1 finite-element matrices.

All matrices act on interior nodes (homogeneous Dirichlet data eliminated),
except ``K_beta`` which lives on the nodes of ``(0, beta]``: Dirichlet at
``x = 0`` and natural at ``x = beta``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ResolutionError
from .model import ModelParams, eval_b, eval_c, validate_params


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray
    index_alpha: int
    index_beta: int
    index_gamma: int

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @property
    def n_int(self) -> int:
        return self.nodes.size - 2

    @property
    def m_eta(self) -> int:
        # nodes 1..index_beta
        return self.index_beta

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def eta_nodes(self) -> np.ndarray:
        return self.nodes[1:self.index_beta + 1]

    @property
    def h_min(self) -> float:
        return float(self.widths.min())

    @property
    def h_max(self) -> float:
        return float(self.widths.max())

    def resolution_limit(self) -> float:
        """Highest frequency the mesh represents faithfully, ``pi / (2 h_min)``."""
        return np.pi / (2.0 * self.h_min)


def build_mesh(p: ModelParams, nx: int) -> Mesh:
    """Union of uniform grids on ``[0,alpha], [alpha,beta], [beta,gamma], [gamma,L]``.

    Cell counts are ``round(nx * length / L)`` per piece; every piece needs at
    least two cells.
    """
    validate_params(p)
    if nx < 8:
        raise ResolutionError(f"nx must be >= 8, got {nx}")
    breaks = [0.0, p.alpha, p.beta, p.gamma, p.L]
    counts = [int(round(nx * (b - a) / p.L)) for a, b in zip(breaks[:-1], breaks[1:])]
    if min(counts) < 2:
        raise ResolutionError(f"nx={nx} gives cell counts {counts}; each sub-interval needs >= 2 cells")
    pieces = [np.linspace(a, b, c + 1)[:-1] for a, b, c in zip(breaks[:-1], breaks[1:], counts)]
    nodes = np.concatenate(pieces + [np.array([p.L])])
    idx = np.cumsum([0] + counts)
    return Mesh(nodes=nodes, index_alpha=int(idx[1]), index_beta=int(idx[2]), index_gamma=int(idx[3]))


@dataclass(frozen=True)
class FemMatrices:
    M: sp.csr_matrix
    K: sp.csr_matrix
    K_b: sp.csr_matrix
    M_c: sp.csr_matrix
    K_beta: sp.csr_matrix


def _assemble(nodes: np.ndarray, coef: np.ndarray, kind: str) -> sp.csr_matrix:
    """Full-node P1 matrix with cellwise constant ``coef``."""
    h = np.diff(nodes)
    n_cells = h.size
    if kind == "stiffness":
        local = np.array([[1.0, -1.0], [-1.0, 1.0]])
        scale = coef / h
    else:
        local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        scale = coef * h
    cells = np.arange(n_cells)
    rows, cols, vals = [], [], []
    for i in range(2):
        for j in range(2):
            rows.append(cells + i)
            cols.append(cells + j)
            vals.append(scale * local[i, j])
    n = nodes.size
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


def assemble_fem(p: ModelParams, mesh: Mesh) -> FemMatrices:
    """Assemble ``M, K, K_b, M_c`` (interior) and ``K_beta`` (nodes of ``(0, beta]``).

    Coefficients are sampled at cell midpoints, which never coincide with a
    breakpoint, so piecewise-constant integrals are exact.
    """
    nodes = mesh.nodes
    mid = mesh.midpoints
    ones = np.ones(mid.size)
    interior = slice(1, -1)

    M = _assemble(nodes, ones, "mass")[interior, interior]
    K = _assemble(nodes, ones, "stiffness")[interior, interior]
    K_b = _assemble(nodes, eval_b(p, mid), "stiffness")[interior, interior]
    M_c = _assemble(nodes, eval_c(p, mid), "mass")[interior, interior]

    ib = mesh.index_beta
    K_beta = _assemble(nodes[:ib + 1], np.ones(ib), "stiffness")[1:, 1:]

    return FemMatrices(
        M=M.tocsr(), K=K.tocsr(), K_b=K_b.tocsr(), M_c=M_c.tocsr(), K_beta=K_beta.tocsr()
    )
