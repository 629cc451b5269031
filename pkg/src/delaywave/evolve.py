"""Implicit time stepping of ``E U' = G U`` and a delay-buffer oracle.

``simulate`` integrates the transport reformulation.  ``simulate_method_of_steps``
integrates the original delayed equations on ``(u, v, y, z)`` with a
circular buffer of past velocities and never forms the delay variable.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .diagnostics import EnergyTrace, trace_row
from .discretize import Mesh, assemble_fem
from .exceptions import AlignmentError, ParameterError, SolverError
from .model import InitialPreset, ModelParams, history_function, initial_fields, validate_params
from .state import StateVector

SCHEMES = ("backward_euler", "crank_nicolson")


def _theta(scheme: str) -> float:
    if scheme == "backward_euler":
        return 1.0
    if scheme == "crank_nicolson":
        return 0.5
    raise ParameterError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def _factor(E, G, dt: float, theta: float):
    try:
        return spla.splu((E - (theta * dt) * G).tocsc())
    except RuntimeError as exc:
        raise SolverError(f"factorization of (E - {theta}*dt*G) failed for dt={dt}: {exc}") from exc


def _stepper(sys, dt: float, scheme: str):
    """Cached ``(lu, rhs_matrix)`` for ``(scheme, dt)`` on ``sys``."""
    key = ("step", scheme, float(dt))
    hit = sys._cache.get(key)
    if hit is None:
        theta = _theta(scheme)
        lu = _factor(sys.E, sys.G, dt, theta)
        rhs = (sys.E + ((1 - theta) * dt) * sys.G).tocsr() if theta < 1 else sys.E
        hit = sys._cache[key] = (lu, rhs)
    return hit


def step(sys, U, dt: float, scheme: str = "backward_euler"):
    """One implicit step; ``U`` may be a :class:`StateVector` or flat array."""
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    x = sys.pack(U)
    lu, rhs = _stepper(sys, dt, scheme)
    xn = lu.solve(rhs @ x)
    return sys.unpack(xn) if isinstance(U, StateVector) else xn


def _nsteps(dt: float, T: float) -> int:
    if not (dt > 0 and T > 0):
        raise ParameterError(f"need dt > 0 and T > 0, got dt={dt}, T={T}")
    return max(1, int(round(T / dt)))


def simulate(sys, U0, dt: float, T: float, scheme: str = "backward_euler",
             snapshot_every: int | None = None) -> EnergyTrace:
    """March from 0 to ``T``; one trace row per step (plus ``t = 0``).

    Snapshots ``(t, StateVector)`` are stored every ``snapshot_every`` steps.
    """
    n = _nsteps(dt, T)
    x = np.array(sys.pack(U0), dtype=float)
    lu, rhs = _stepper(sys, dt, scheme)
    rows = [trace_row(sys, 0.0, x)]
    snaps = []
    if snapshot_every:
        snaps.append((0.0, sys.unpack(x)))
    for k in range(1, n + 1):
        x = lu.solve(rhs @ x)
        t = k * dt
        rows.append(trace_row(sys, t, x))
        if snapshot_every and k % snapshot_every == 0:
            snaps.append((t, sys.unpack(x)))
    meta = {
        "scheme": scheme,
        "dt": dt,
        "T": T,
        "steps": n,
        "nx": sys.mesh.n_cells,
        "nrho": sys.nrho,
        "params": sys.params.to_dict(),
    }
    return EnergyTrace(np.array(rows), metadata=meta, snapshots=snaps)


def delay_steps(tau: float, dt: float, rtol: float = 1e-8) -> int:
    """Number of steps per delay; ``tau`` must be an integer multiple of ``dt``."""
    r = tau / dt
    nd = int(round(r))
    if nd < 1 or abs(r - nd) > rtol * max(1.0, r):
        raise AlignmentError(f"tau/dt = {r!r} is not an integer (tau={tau}, dt={dt})")
    return nd


def simulate_method_of_steps(p: ModelParams, mesh: Mesh, preset: InitialPreset, dt: float, T: float,
                             snapshot_every: int | None = None) -> EnergyTrace:
    """Backward-Euler integration of the delayed system with a velocity history buffer.

    The delayed flux uses ``v(t_{n+1} - tau)`` read from the buffer (or from
    the history ``f0`` for negative times).  ``E3`` is rebuilt from the buffer
    with right-endpoint quadrature on the buffer's own delay grid.
    Snapshots hold ``(u, v, y, z)`` with an empty delay block.
    """
    validate_params(p)
    nd = delay_steps(p.tau, dt)
    n = _nsteps(dt, T)
    fem = assemble_fem(p, mesh)
    n_int, m = mesh.n_int, mesh.m_eta

    I_n = sp.identity(n_int, format="csr")
    Z_n = sp.csr_matrix((n_int, n_int))
    G = sp.bmat(
        [
            [Z_n, I_n, None, None],
            [-p.a * fem.K, -p.kappa1 * fem.K_b, None, -fem.M_c],
            [None, None, Z_n, I_n],
            [None, fem.M_c, -fem.K, Z_n],
        ],
        format="csr",
    )
    E = sp.block_diag([I_n, fem.M, I_n, fem.M], format="csr")
    lu = _factor(E, G, dt, 1.0)
    K_b = fem.K_b
    K_beta = fem.K_beta

    u0, v0, y0, z0 = initial_fields(p, mesh, preset)
    f0 = history_function(p, preset, v0)
    x = np.concatenate([u0, v0, y0, z0])
    vs = slice(n_int, 2 * n_int)

    # buf[k % nd] holds v at step k for k in [n - nd, n - 1]
    buf = np.empty((nd, n_int))
    for k in range(-nd, 0):
        buf[k % nd] = f0(k * dt)

    w3 = 0.5 * p.tau * abs(p.kappa2) / nd
    rate = p.dissipation_rate

    def row(t, x, step_index):
        u, v, y, z = (x[i * n_int:(i + 1) * n_int] for i in range(4))
        E1 = 0.5 * (v @ (fem.M @ v) + p.a * (u @ (fem.K @ u)))
        E2 = 0.5 * (z @ (fem.M @ z) + y @ (fem.K @ y))
        E3 = 0.0
        for j in range(1, nd + 1):
            vb = buf[(step_index - j) % nd][:m]
            E3 += vb @ (K_beta @ vb)
        E3 *= w3
        vb = v[:m]
        return [t, E1, E2, E3, E1 + E2 + E3, rate * float(vb @ (K_beta @ vb))]

    rows = [row(0.0, x, 0)]
    snaps = []
    empty = np.zeros((1, 0))
    if snapshot_every:
        snaps.append((0.0, StateVector(*np.split(x, 4), eta=empty)))
    for k in range(1, n + 1):
        # delayed velocity at step k - nd; for nd == 1 this is the current v
        delayed = x[vs] if nd == 1 else buf[(k - nd) % nd]
        rhs = E @ x
        rhs[vs] -= dt * p.kappa2 * (K_b @ delayed)
        buf[(k - 1) % nd] = x[vs]
        x = lu.solve(rhs)
        t = k * dt
        rows.append(row(t, x, k))
        if snapshot_every and k % snapshot_every == 0:
            snaps.append((t, StateVector(*np.split(x, 4), eta=empty)))
    meta = {"scheme": "backward_euler", "dt": dt, "T": T, "steps": n, "nx": mesh.n_cells,
            "delay_steps": nd, "params": p.to_dict(), "route": "method_of_steps"}
    return EnergyTrace(np.array(rows), metadata=meta, snapshots=snaps)
