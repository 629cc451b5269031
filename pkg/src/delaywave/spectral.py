"""Spectrum of ``A_h`` and its resolvent norm along the imaginary axis.

Resolvent norms are measured in the energy geometry: with ``M_h = R^T R``,

    ||(i lam - A_h)^{-1}||_{M_h} = 1 / sigma_min(R (i lam - A_h) R^{-1}).

``M_h`` is block diagonal with tridiagonal blocks, hence globally
tridiagonal, so ``R`` is a banded Cholesky factor.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConvergenceError, FitError, SolverError


@dataclass(frozen=True)
class ResolventSample:
    lam: float
    sigma_min: float
    res_norm: float

    @property
    def singular(self) -> bool:
        return self.sigma_min == 0.0


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray

    @property
    def spectral_abscissa(self) -> float:
        return float(np.max(self.eigenvalues.real))

    @property
    def min_axis_distance(self) -> float:
        return float(np.min(np.abs(self.eigenvalues.real)))

    def summary(self) -> dict:
        return {
            "count": int(self.eigenvalues.size),
            "spectral_abscissa": self.spectral_abscissa,
            "min_axis_distance": self.min_axis_distance,
        }


# --------------------------------------------------------------------------
# eigenvalues


def eigenvalues(sys, targets=None, k: int = 6, tol: float = 1e-10) -> SpectrumResult:
    """All eigenvalues (dense) or ``k`` eigenvalues nearest each shift in ``targets``.

    The iterative route is shift-invert Arnoldi on ``(G - s E)^{-1} E``.
    """
    if targets is None:
        vals = sla.eigvals(sys.G.toarray(), sys.E.toarray())
        vals = vals[np.isfinite(vals)]
        return SpectrumResult(_sort_conjugate(vals))
    found = []
    for s in targets:
        s = complex(s)
        lu = spla.splu((sys.G - s * sys.E).tocsc().astype(complex))
        op = spla.LinearOperator((sys.dim, sys.dim), matvec=lambda x: lu.solve(sys.E @ x), dtype=complex)
        # the transport block makes the operator far from normal; a wide Krylov space helps
        v0 = np.random.default_rng(0).standard_normal(sys.dim).astype(complex)
        ncv = min(sys.dim - 1, max(4 * k, 40))
        try:
            theta, vecs = spla.eigs(op, k=k, which="LM", v0=v0, ncv=ncv, tol=tol, maxiter=20 * sys.dim)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"shift-invert Arnoldi did not converge at shift {s}", residual=None) from exc
        mu = s + 1.0 / theta
        res = [np.linalg.norm(sys.G @ vecs[:, i] - mu[i] * (sys.E @ vecs[:, i])) / np.linalg.norm(vecs[:, i])
               for i in range(mu.size)]
        scale = spla.norm(sys.G, 1)
        if max(res) > 1e-6 * scale:
            raise ConvergenceError(f"eigenpair residual {max(res):.3e} too large at shift {s}", residual=max(res))
        found.append(mu)
    vals = np.concatenate(found)
    # add conjugates (A_h is real) and drop duplicates from overlapping shifts
    vals = np.concatenate([vals, vals.conj()])
    vals = _dedupe(vals)
    return SpectrumResult(_sort_conjugate(vals))


def _dedupe(vals: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    out = []
    for v in vals[np.lexsort((vals.imag, vals.real))]:
        if not out or abs(v - out[-1]) > rtol * max(1.0, abs(v)):
            out.append(v)
    return np.array(out)


def _sort_conjugate(vals: np.ndarray) -> np.ndarray:
    order = np.lexsort((vals.imag, np.round(np.abs(vals.imag), 8), np.round(vals.real, 8)))
    return vals[order]


# --------------------------------------------------------------------------
# energy-norm factor


class EnergyFactor:
    """Banded Cholesky ``M_h = R^T R`` (``R`` upper bidiagonal)."""

    def __init__(self, M_h):
        coo = sp.coo_matrix(M_h)
        if np.any((np.abs(coo.row - coo.col) > 1) & (coo.data != 0)):
            raise SolverError("energy Gram matrix is not tridiagonal")
        d0 = M_h.diagonal()
        d1 = M_h.diagonal(1)
        ab = np.zeros((2, d0.size))
        ab[0, 1:] = d1
        ab[1] = d0
        self.ab = sla.cholesky_banded(ab, lower=False)

    def R(self, x):
        # (R x)_i = r_ii x_i + r_{i,i+1} x_{i+1}
        out = self.ab[1] * x
        out[:-1] += self.ab[0, 1:] * x[1:]
        return out

    def RT(self, x):
        out = self.ab[1] * x
        out[1:] += self.ab[0, 1:] * x[:-1]
        return out

    def R_solve(self, x):
        return sla.solve_banded((0, 1), self.ab, x)

    def RT_solve(self, x):
        # R^T is lower bidiagonal with subdiagonal r_{i,i+1}
        lower = np.zeros_like(self.ab)
        lower[0] = self.ab[1]
        lower[1, :-1] = self.ab[0, 1:]
        return sla.solve_banded((1, 0), lower, x)


def energy_factor(sys) -> EnergyFactor:
    f = sys._cache.get("energy_factor")
    if f is None:
        f = sys._cache["energy_factor"] = EnergyFactor(sys.M_h)
    return f


# --------------------------------------------------------------------------
# resolvent


def _resolvent_sparse(sys, lam: float, tol: float) -> float:
    """Largest singular value of ``R (i lam - A_h)^{-1} R^{-1}``."""
    fac = energy_factor(sys)
    T = (1j * lam) * sys.E - sys.G
    try:
        lu = spla.splu(T.tocsc().astype(complex))
    except RuntimeError:
        return math.inf
    E = sys.E

    def matvec(x):
        x = np.ravel(x)
        return fac.R(lu.solve(E @ fac.R_solve(x)))

    def rmatvec(x):
        x = np.ravel(x)
        return fac.RT_solve(E.T @ lu.solve(fac.RT(x), trans="H"))

    n = sys.dim
    XhX = spla.LinearOperator((n, n), matvec=lambda x: rmatvec(matvec(x)), dtype=complex)
    v0 = np.ones(n, dtype=complex)
    try:
        vals = spla.eigsh(XhX, k=1, which="LA", v0=v0, tol=tol, ncv=min(n, 24), return_eigenvectors=False,
                          maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos did not converge at lambda={lam}") from exc
    top = float(vals[0].real)
    if not np.isfinite(top):
        return math.inf
    return math.sqrt(max(top, 0.0))


def _resolvent_dense(sys, lam: float) -> float:
    A = sys.A_dense
    Rm = sys._cache.get("dense_R")
    if Rm is None:
        Rm = sys._cache["dense_R"] = sla.cholesky(sys.M_h.toarray(), lower=False)
    T = 1j * lam * np.eye(sys.dim) - A
    X = sla.solve_triangular(Rm, (Rm @ T).T, trans="T", lower=False).T  # R T R^{-1}
    return float(sla.svdvals(X)[-1])


def resolvent_norm(sys, lam: float, method: str = "sparse", tol: float = 1e-12) -> ResolventSample:
    """Energy-norm resolvent at ``i lam``.

    ``method="sparse"`` uses a complex sparse LU and Lanczos on ``X^H X``;
    ``method="dense"`` forms ``R (i lam - A_h) R^{-1}`` and takes its SVD.
    """
    lam = float(lam)
    if method == "sparse":
        norm = _resolvent_sparse(sys, lam, tol)
        sigma = 0.0 if not np.isfinite(norm) or norm == 0 else 1.0 / norm
    elif method == "dense":
        sigma = _resolvent_dense(sys, lam)
        norm = math.inf if sigma == 0 else 1.0 / sigma
    else:
        raise ValueError(f"unknown method {method!r}")
    return ResolventSample(lam=lam, sigma_min=sigma, res_norm=norm if sigma > 0 else math.inf)


def default_workers() -> int:
    env = os.environ.get("DELAYWAVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def resolvent_sweep(sys, lambda_grid, method: str = "sparse", workers: int | None = None) -> list:
    """``resolvent_norm`` at every grid point, output in input order."""
    grid = [float(x) for x in lambda_grid]
    if not all(np.isfinite(grid)):
        raise ValueError("lambda grid must be finite")
    workers = workers or default_workers()
    # warm shared caches before fanning out
    if method == "sparse":
        energy_factor(sys)
    if workers <= 1 or len(grid) <= 1:
        return [resolvent_norm(sys, lam, method) for lam in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda lam: resolvent_norm(sys, lam, method), grid))


def fit_growth_exponent(samples, lambda_min: float) -> float:
    """Slope of log(running max of res_norm) against log(lambda) for ``lambda >= lambda_min``."""
    if lambda_min <= 0:
        raise FitError("lambda_min must be positive")
    pts = sorted((s.lam, s.res_norm) for s in samples if s.lam >= lambda_min)
    if len(pts) < 5:
        raise FitError(f"need at least 5 samples with lambda >= {lambda_min}, got {len(pts)}")
    lam = np.array([p[0] for p in pts])
    r = np.array([p[1] for p in pts])
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise FitError("resolvent norms must be finite and positive")
    env = np.maximum.accumulate(r)
    slope, _ = np.polyfit(np.log(lam), np.log(env), 1)
    return float(slope)


def lambda_grid(lmin: float, lmax: float, samples: int, spacing: str = "log") -> np.ndarray:
    if samples == 1:
        return np.array([float(lmin)])
    if spacing == "log" and lmin > 0:
        return np.geomspace(lmin, lmax, samples)
    return np.linspace(lmin, lmax, samples)
