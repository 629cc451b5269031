"""Semi-discrete generator ``A_h`` and energy Gram matrix ``M_h``.

The semi-discrete system is kept in the mass form ``E U' = G U`` with
``E = diag(I, M, I, M, I)`` and sparse ``G``; ``A_h = E^{-1} G``.  The
energy inner product is ``<U, V> = U^H M_h V`` with

    M_h = diag(a K, M, K, M, tau w drho (I_nrho kron K_beta)),  w = |kappa2|.

The delay variable is transported in ``rho`` with first-order upwinding and
inflow ``eta(., 0) = v`` on ``(0, beta]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import FemMatrices, Mesh, assemble_fem
from .exceptions import ResolutionError, ShapeError, SolverError
from .model import ModelParams, validate_params
from .state import StateVector


def eta_weight(p: ModelParams) -> float:
    """Gram weight of the delay block; ``tau |kappa2|``, or ``tau`` if ``kappa2 == 0``."""
    return p.tau * (abs(p.kappa2) if p.kappa2 != 0 else 1.0)


@dataclass
class SemiDiscreteSystem:
    params: ModelParams
    mesh: Mesh
    fem: FemMatrices
    nrho: int
    delta_rho: float
    E: sp.csr_matrix
    G: sp.csr_matrix
    M_h: sp.csr_matrix
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_int(self) -> int:
        return self.mesh.n_int

    @property
    def m_eta(self) -> int:
        return self.mesh.m_eta

    @property
    def dim(self) -> int:
        return 4 * self.n_int + self.m_eta * self.nrho

    def blocks(self) -> dict:
        """Slices of the flat state for each field."""
        n, m = self.n_int, self.m_eta
        return {
            "u": slice(0, n),
            "v": slice(n, 2 * n),
            "y": slice(2 * n, 3 * n),
            "z": slice(3 * n, 4 * n),
            "eta": slice(4 * n, 4 * n + m * self.nrho),
        }

    def wave_slice(self) -> slice:
        return slice(0, 4 * self.n_int)

    @cached_property
    def mass_lu(self):
        return spla.splu(self.fem.M.tocsc())

    @cached_property
    def form_matrix(self) -> sp.csr_matrix:
        """Sparse ``M_h A_h``, so that ``<A_h U, V>`` is ``(S U)^T conj(V)``."""
        n = self.n_int
        a = self.params.a
        w = eta_weight(self.params) * self.delta_rho
        nI = sp.identity(n, format="csr")
        P = sp.block_diag(
            [a * self.fem.K, nI, self.fem.K, nI, sp.kron(sp.identity(self.nrho), w * self.fem.K_beta)],
            format="csr",
        )
        return (P @ self.G).tocsr()

    @cached_property
    def A_dense(self) -> np.ndarray:
        """Dense ``A_h = E^{-1} G``; only for small systems."""
        G = self.G.toarray()
        sl = self.blocks()
        Minv = sla.inv(self.fem.M.toarray())
        A = G.copy()
        A[sl["v"]] = Minv @ G[sl["v"]]
        A[sl["z"]] = Minv @ G[sl["z"]]
        return A

    def pack(self, U) -> np.ndarray:
        if isinstance(U, StateVector):
            if (U.n_int, U.m_eta, U.nrho) != (self.n_int, self.m_eta, self.nrho):
                raise ShapeError(
                    f"state layout {(U.n_int, U.m_eta, U.nrho)} does not match system "
                    f"{(self.n_int, self.m_eta, self.nrho)}"
                )
            return U.pack()
        x = np.asarray(U)
        if x.shape != (self.dim,):
            raise ShapeError(f"state vector has shape {x.shape}, expected ({self.dim},)")
        return x

    def unpack(self, x) -> StateVector:
        return StateVector.unpack(x, self.n_int, self.m_eta, self.nrho)

    def restrict_beta(self, v: np.ndarray) -> np.ndarray:
        return v[..., : self.m_eta]

    def vx_seminorm(self, v: np.ndarray) -> float:
        """``int_0^beta |v_x|^2`` for an interior nodal ``v``."""
        vb = self.restrict_beta(v)
        return float(np.real(np.vdot(vb, self.fem.K_beta @ vb)))


def assemble_generator(p: ModelParams, mesh: Mesh, nrho: int, fem: FemMatrices | None = None) -> SemiDiscreteSystem:
    """Build ``E``, ``G`` and ``M_h`` for ``nrho`` delay levels.

    Equations::

        u' = v
        M v' = -a K u - K_b (kappa1 v + kappa2 ext(eta_nrho)) - M_c z
        y' = z
        M z' = -K y + M_c v
        eta_j' = -(eta_j - eta_{j-1}) / (tau drho),  eta_0 = v|_(0, beta]
    """
    validate_params(p)
    if nrho < 2:
        raise ResolutionError(f"nrho must be >= 2, got {nrho}")
    fem = fem if fem is not None else assemble_fem(p, mesh)
    n, m = mesh.n_int, mesh.m_eta
    drho = 1.0 / nrho
    rate = 1.0 / (p.tau * drho)

    I_n = sp.identity(n, format="csr")
    Z_n = sp.csr_matrix((n, n))
    # extension by zero from (0, beta] nodes to interior nodes
    R = sp.eye(m, n, format="csr")
    ext_top = (fem.K_b @ R.T).tocsr()

    eta_v = sp.lil_matrix((m * nrho, n))
    eta_v[:m, :] = rate * R
    eta_eta = sp.kron(
        sp.diags([-np.ones(nrho), np.ones(nrho - 1)], [0, -1]), rate * sp.identity(m), format="csr"
    )
    v_eta = sp.lil_matrix((n, m * nrho))
    v_eta[:, (nrho - 1) * m:] = -p.kappa2 * ext_top

    G = sp.bmat(
        [
            [Z_n, I_n, None, None, None],
            [-p.a * fem.K, -p.kappa1 * fem.K_b, None, -fem.M_c, v_eta.tocsr()],
            [None, None, Z_n, I_n, None],
            [None, fem.M_c, -fem.K, Z_n, None],
            [None, eta_v.tocsr(), None, None, eta_eta],
        ],
        format="csr",
    )
    G.eliminate_zeros()
    E = sp.block_diag([I_n, fem.M, I_n, fem.M, sp.identity(m * nrho)], format="csr")
    w = eta_weight(p) * drho
    M_h = sp.block_diag(
        [p.a * fem.K, fem.M, fem.K, fem.M, sp.kron(sp.identity(nrho), w * fem.K_beta)], format="csr"
    )
    M_h.eliminate_zeros()  # kron may go through BSR and keep padding zeros
    return SemiDiscreteSystem(
        params=p, mesh=mesh, fem=fem, nrho=nrho, delta_rho=drho, E=E, G=G, M_h=M_h.tocsr()
    )


def apply_generator(sys: SemiDiscreteSystem, U):
    """Return ``A_h U`` (same type as ``U``: :class:`StateVector` or flat array)."""
    x = sys.pack(U)
    out = sys.G @ x
    sl = sys.blocks()
    lu = sys.mass_lu
    for name in ("v", "z"):
        rhs = out[sl[name]]
        if np.iscomplexobj(rhs):
            out[sl[name]] = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
        else:
            out[sl[name]] = lu.solve(rhs)
    return sys.unpack(out) if isinstance(U, StateVector) else out


def energy_inner(sys: SemiDiscreteSystem, U, V) -> complex | float:
    """``<U, V>_{M_h} = U^H M_h V``."""
    x, y = sys.pack(U), sys.pack(V)
    val = np.vdot(x, sys.M_h @ y)
    return float(val.real) if not (np.iscomplexobj(x) or np.iscomplexobj(y)) else complex(val)


def energy_norm_sq(sys: SemiDiscreteSystem, U) -> float:
    return float(np.real(energy_inner(sys, U, U)))


def dissipation_form(sys: SemiDiscreteSystem, U) -> float:
    """``Re <A_h U, U>_{M_h}``, evaluated through the sparse form matrix."""
    x = sys.pack(U)
    return float(np.real(np.vdot(x, sys.form_matrix @ x)))


def max_dissipation_direction(sys: SemiDiscreteSystem):
    """Largest value of ``Re <A_h U, U>`` over ``||U||_{M_h} = 1`` and its maximiser.

    Solves the symmetric generalized eigenproblem for the symmetric part of
    ``M_h A_h`` against ``M_h`` (dense; intended for moderate sizes).
    """
    S = sys.form_matrix.toarray()
    sym = 0.5 * (S + S.T)
    vals, vecs = sla.eigh(sym, sys.M_h.toarray(), subset_by_index=[sys.dim - 1, sys.dim - 1])
    return float(vals[-1]), vecs[:, -1]


def _stationary_lu(sys: SemiDiscreteSystem):
    lu = sys._cache.get("stationary_lu")
    if lu is None:
        try:
            lu = spla.splu(sys.G.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"generator is singular: {exc} (dim={sys.dim})") from exc
        sys._cache["stationary_lu"] = lu
    return lu


def solve_stationary(sys: SemiDiscreteSystem, F, rtol: float = 1e-10):
    """Solve ``-A_h U = F`` (i.e. ``G U = -E F``); returns ``U`` like ``F``.

    One step of iterative refinement is applied; the result must satisfy
    ``||A_h U + F||_{M_h} <= rtol ||F||_{M_h}``.
    """
    f = sys.pack(F)
    if not np.all(np.isfinite(f)):
        raise SolverError("right-hand side is not finite")
    lu = _stationary_lu(sys)

    def solve(b):
        if np.iscomplexobj(b):
            return lu.solve(np.ascontiguousarray(b.real)) + 1j * lu.solve(np.ascontiguousarray(b.imag))
        return lu.solve(b)

    rhs = -(sys.E @ f)
    x = solve(rhs)
    x = x + solve(rhs - sys.G @ x)
    if not np.all(np.isfinite(x)):
        raise SolverError(f"stationary solve produced non-finite values (dim={sys.dim})")
    res = stationary_residual(sys, x, f)
    if res > rtol:
        raise SolverError(f"stationary solve residual {res:.3e} exceeds {rtol:.1e} (dim={sys.dim})")
    return sys.unpack(x) if isinstance(F, StateVector) else x


def stationary_residual(sys: SemiDiscreteSystem, U, F) -> float:
    """``||A_h U + F||_{M_h} / ||F||_{M_h}``."""
    r = apply_generator(sys, sys.pack(U)) + sys.pack(F)
    fn = np.sqrt(energy_norm_sq(sys, F))
    return float(np.sqrt(energy_norm_sq(sys, r)) / fn) if fn > 0 else float(np.sqrt(energy_norm_sq(sys, r)))
