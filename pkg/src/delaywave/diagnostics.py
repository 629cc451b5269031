"""Energy bookkeeping, discrete dissipation check and decay-rate fitting."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import FitError, TraceError

TRACE_HEADER = ("t", "E1", "E2", "E3", "E", "D")


@dataclass
class EnergyTrace:
    """Rows ``(t, E1, E2, E3, E, D)``; ``D = (kappa1 - |kappa2|) int_0^beta |v_x|^2``."""

    rows: np.ndarray
    metadata: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, 6)

    t = property(lambda self: self.rows[:, 0])
    E1 = property(lambda self: self.rows[:, 1])
    E2 = property(lambda self: self.rows[:, 2])
    E3 = property(lambda self: self.rows[:, 3])
    E = property(lambda self: self.rows[:, 4])
    D = property(lambda self: self.rows[:, 5])

    def __len__(self):
        return self.rows.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for row in self.rows:
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "EnergyTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TRACE_HEADER:
                raise TraceError(f"unexpected header {header}")
            rows = [[float(x) for x in r] for r in reader]
        return cls(np.array(rows).reshape(-1, 6))


def energy_components(sys, U):
    """``(E1, E2, E3, E)`` of a discrete state."""
    x = sys.pack(U)
    sl = sys.blocks()
    fem, p = sys.fem, sys.params
    u, v, y, z = (x[sl[k]] for k in ("u", "v", "y", "z"))
    eta = x[sl["eta"]].reshape(sys.nrho, sys.m_eta)

    def q(A, w):
        return float(np.real(np.vdot(w, A @ w)))

    E1 = 0.5 * (q(fem.M, v) + p.a * q(fem.K, u))
    E2 = 0.5 * (q(fem.M, z) + q(fem.K, y))
    E3 = 0.5 * p.tau * abs(p.kappa2) * sys.delta_rho * sum(q(fem.K_beta, e) for e in eta)
    return E1, E2, E3, E1 + E2 + E3


def trace_row(sys, t: float, x: np.ndarray) -> list:
    E1, E2, E3, E = energy_components(sys, x)
    v = x[sys.blocks()["v"]]
    return [t, E1, E2, E3, E, sys.params.dissipation_rate * sys.vx_seminorm(v)]


# --------------------------------------------------------------------------


@dataclass
class DissipationReport:
    passed: bool
    margin: float  # max_n [(E_{n+1} - E_n)/dt + D_{n+1}]
    threshold: float
    worst_step: Optional[int]
    failing_steps: list

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "margin": self.margin,
            "threshold": self.threshold,
            "worst_step": self.worst_step,
            "failing_steps": self.failing_steps[:20],
        }


def check_dissipation(trace: EnergyTrace, sys=None, tol: float = 1e-8) -> DissipationReport:
    """Check the discrete energy law ``(E_{n+1} - E_n)/dt + D_{n+1} <= tol E_0``.

    ``sys`` is accepted for interface symmetry; the trace carries ``D`` already.
    """
    t, E, D = trace.t, trace.E, trace.D
    if len(trace) < 2:
        return DissipationReport(True, 0.0, tol * (E[0] if len(E) else 0.0), None, [])
    dt = np.diff(t)
    if np.any(dt <= 0):
        bad = int(np.argmax(dt <= 0))
        raise TraceError(f"time column not strictly increasing at row {bad + 1}")
    q = np.diff(E) / dt + D[1:]
    threshold = tol * E[0]
    failing = [int(i) + 1 for i in np.nonzero(q > threshold)[0]]
    worst = int(np.argmax(q))
    margin = float(q[worst])
    return DissipationReport(
        passed=not failing,
        margin=margin,
        threshold=float(threshold),
        worst_step=worst + 1,
        failing_steps=failing,
    )


def is_monotone(trace: EnergyTrace, tol: float = 1e-8) -> bool:
    """``E`` nonincreasing at every step within ``tol * E(0)``."""
    return bool(np.all(np.diff(trace.E) <= tol * trace.E[0]))


# --------------------------------------------------------------------------


@dataclass
class DecayFit:
    C: float
    p: float
    window: tuple          # requested window
    fit_window: tuple      # window actually fitted (after floor truncation)
    floor_time: Optional[float]
    initial_p: float       # exponent over the requested window

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "p": self.p,
            "window": list(self.window),
            "fit_window": list(self.fit_window),
            "floor_time": self.floor_time,
            "initial_p": self.initial_p,
        }


def _loglog_fit(t: np.ndarray, E: np.ndarray):
    if t.size < 2:
        raise FitError("need at least two points in the fit window")
    if np.any(E <= 0):
        raise FitError("energies must be positive in the fit window")
    if np.any(t <= 0):
        raise FitError("times must be positive in the fit window")
    slope, intercept = np.polyfit(np.log(t), np.log(E), 1)
    return float(math.exp(intercept)), float(-slope)


def local_slopes(t: np.ndarray, E: np.ndarray, n_bins: int = 40):
    """Local ``-d log E / d log t`` on a log-spaced resampling of ``(t, E)``."""
    tb = np.geomspace(t[0], t[-1], n_bins)
    lE = np.interp(np.log(tb), np.log(t), np.log(E))
    s = -np.gradient(lE, np.log(tb))
    return tb, s


def fit_decay_exponent(trace: EnergyTrace, t_window=None, auto_floor: bool = True) -> DecayFit:
    """Fit ``E ~ C t^{-p}`` over ``t_window``.

    With ``auto_floor`` the window is cut at the first time where the local
    log-log slope exceeds ``p + 1`` (onset of the exponential tail of a
    finite-dimensional system) and the fit is repeated on the shortened window.
    """
    t, E = trace.t, trace.E
    lo, hi = t_window if t_window is not None else (t[t > 0][0], t[-1])
    if lo <= 0 or hi <= lo or lo < t[0] or hi > t[-1] + 1e-12:
        raise FitError(f"window ({lo}, {hi}) not inside the trace ({t[0]}, {t[-1]})")
    sel = (t >= lo) & (t <= hi)
    C, p = _loglog_fit(t[sel], E[sel])
    initial_p = p
    floor_time = None
    fit_hi = hi
    if auto_floor:
        for _ in range(10):
            ts, s = local_slopes(t[sel], E[sel])
            over = np.nonzero(s > p + 1.0)[0]
            if over.size == 0:
                break
            cut = float(ts[over[0]])
            if cut <= lo * 1.5 or cut >= fit_hi:
                break
            floor_time = cut
            fit_hi = cut
            sel = (t >= lo) & (t <= fit_hi)
            C, p = _loglog_fit(t[sel], E[sel])
    return DecayFit(C=C, p=p, window=(float(lo), float(hi)), fit_window=(float(lo), float(fit_hi)),
                    floor_time=floor_time, initial_p=initial_p)


def graph_norm_sq(sys, U) -> float:
    """``||U||^2_{D(A)} = ||U||^2_{M_h} + ||A_h U||^2_{M_h}``."""
    from .generator import apply_generator, energy_norm_sq

    x = sys.pack(U)
    return energy_norm_sq(sys, x) + energy_norm_sq(sys, apply_generator(sys, x))
