"""Verification suite shared by ``delaywave verify`` and the test-suite.

Each ``criterion_*`` function returns a :class:`CriterionResult`.  Sizes
and tolerances default to the reference settings; ``quick=True`` shrinks
meshes and horizons for smoke runs (tolerances unchanged).
"""
from __future__ import annotations

import dataclasses
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import check_dissipation, fit_decay_exponent, graph_norm_sq, is_monotone
from .discretize import build_mesh
from .evolve import simulate, simulate_method_of_steps
from .generator import (
    assemble_generator,
    dissipation_form,
    energy_norm_sq,
    max_dissipation_direction,
    solve_stationary,
    stationary_residual,
)
from .model import HypothesisWarning, InitialPreset, ModelParams, build_initial_state
from .spectral import eigenvalues, fit_growth_exponent, lambda_grid, resolvent_norm, resolvent_sweep


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key} {self.title} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"criterion": self.key, "title": self.title, "pass": self.passed,
                "detail": self.detail, "seconds": self.seconds}


def validation_params(p: ModelParams) -> ModelParams:
    """Same geometry with damping and coupling switched off."""
    return dataclasses.replace(p, kappa1=0.0, kappa2=0.0, c0=0.0, enforce_H=False)


def _quiet(fn):
    def wrapped(*args, **kwargs):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HypothesisWarning)
            return fn(*args, **kwargs)
    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


def _timed(key, title, fn, *args, **kwargs) -> CriterionResult:
    t0 = time.perf_counter()
    passed, detail = fn(*args, **kwargs)
    return CriterionResult(key, title, bool(passed), detail, time.perf_counter() - t0)


# --------------------------------------------------------------------------


def criterion_dissipativity(p: ModelParams, meshes=(50, 100, 200), nrhos=(8, 16), n_states=200,
                            tol=1e-10, seed=0) -> CriterionResult:
    """Random states satisfy the dissipation bound; the form is nowhere positive."""

    @_quiet
    def run():
        rng = np.random.default_rng(seed)
        worst = -np.inf
        for nx in meshes:
            mesh = build_mesh(p, nx)
            for nrho in nrhos:
                sys = assemble_generator(p, mesh, nrho)
                vs = sys.blocks()["v"]
                for _ in range(n_states):
                    x = rng.standard_normal(sys.dim)
                    val = dissipation_form(sys, x) + p.dissipation_rate * sys.vx_seminorm(x[vs])
                    worst = max(worst, val / energy_norm_sq(sys, x))
        # sign of Re<AU,U> over all states: top eigenvalue of the symmetric part
        sys = assemble_generator(p, build_mesh(p, meshes[0]), nrhos[0])
        top, _ = max_dissipation_direction(sys)
        scale = float(abs(sys.form_matrix).sum(axis=0).max())
        sign_ok = top <= 1e-12 * scale
        bound_ok = worst <= tol
        return bound_ok and sign_ok, {
            "max_normalized_bound_violation": worst, "tol": tol,
            "max_dissipation_form": top, "sign_tol": 1e-12 * scale,
            "bound_ok": bound_ok, "sign_ok": sign_ok,
        }

    return _timed("C1", "matrix dissipativity", run)


def criterion_monotonicity(p: ModelParams, nx=200, nrho=16, dt=1e-2, T=50.0, tol=1e-8) -> CriterionResult:
    """Backward-Euler energy is nonincreasing and obeys the discrete energy law."""

    @_quiet
    def run():
        mesh = build_mesh(p, nx)
        sys = assemble_generator(p, mesh, nrho)
        U0 = build_initial_state(p, mesh, InitialPreset(), nrho)
        trace = simulate(sys, U0, dt, T)
        mono = is_monotone(trace, tol)
        rep = check_dissipation(trace, sys, tol)
        inc = float(np.max(np.diff(trace.E)))
        return mono and rep.passed, {"monotone": mono, "max_increment": inc, "E0": float(trace.E[0]),
                                     "energy_law": rep.to_dict()}

    return _timed("C2", "energy monotonicity (backward Euler)", run)


def criterion_kernel(p: ModelParams, meshes=(50, 100, 200), nrhos=(8, 16), tol=1e-10, seed=1) -> CriterionResult:
    """``0`` is in the resolvent set and stationary solves are accurate."""

    @_quiet
    def run():
        rng = np.random.default_rng(seed)
        rows = []
        ok = True
        for nx in meshes:
            mesh = build_mesh(p, nx)
            for nrho in nrhos:
                sys = assemble_generator(p, mesh, nrho)
                smin = resolvent_norm(sys, 0.0).sigma_min
                F = rng.standard_normal(sys.dim)
                res = stationary_residual(sys, solve_stationary(sys, F), F)
                ok &= smin > 0 and res <= tol
                rows.append({"nx": nx, "nrho": nrho, "sigma_min": smin, "residual": res})
        return ok, {"cases": rows, "tol": tol}

    return _timed("C3", "trivial kernel / stationary solve", run)


def criterion_axis_gap(p: ModelParams, nx=100, nrho=16, samples=200, eig_nrho=8,
                       validation_meshes=(50, 100, 200)) -> CriterionResult:
    """Damped: gap along the axis and Re < 0. Undamped: gap closes at pi sqrt(a)/L."""

    @_quiet
    def run():
        mesh = build_mesh(p, nx)
        sys = assemble_generator(p, mesh, nrho)
        grid = lambda_grid(0.0, mesh.resolution_limit(), samples, spacing="lin")
        sweep = resolvent_sweep(sys, grid)
        min_sigma = min(s.sigma_min for s in sweep)
        spec = eigenvalues(assemble_generator(p, mesh, eig_nrho))
        damped_ok = min_sigma > 0 and spec.spectral_abscissa < 0

        pv = validation_params(p)
        lam1 = np.pi * np.sqrt(pv.a) / pv.L
        sig = []
        for n in validation_meshes:
            vsys = assemble_generator(pv, build_mesh(pv, n), 2)
            sig.append(resolvent_norm(vsys, lam1).sigma_min)
        ratios = [sig[i] / sig[i + 1] for i in range(len(sig) - 1)]
        vspec = eigenvalues(assemble_generator(pv, build_mesh(pv, validation_meshes[0]), 2))
        waves = vspec.eigenvalues[np.abs(vspec.eigenvalues.imag) > 1e-3]
        on_axis = float(np.max(np.abs(waves.real)))
        # the damped check must fail here: sigma_min -> 0 and eigenvalues sit on the axis
        closes = all(r >= 3.0 for r in ratios) and on_axis <= 1e-8
        return damped_ok and closes, {
            "damped": {"min_sigma_min": min_sigma, "lambda_max": float(grid[-1]),
                       "spectral_abscissa": spec.spectral_abscissa,
                       "min_axis_distance": spec.min_axis_distance, "pass": damped_ok},
            "validation": {"lambda": lam1, "sigma_min": sig, "refinement_ratios": ratios,
                           "max_abs_re_wave_modes": on_axis, "gap_closes": closes},
        }

    return _timed("C4", "imaginary-axis gap", run)


def criterion_resolvent_growth(p: ModelParams, meshes=(100, 200), nrho=16, samples=200, max_slope=2.3,
                               max_increase=0.2) -> CriterionResult:
    """Envelope growth exponent of the resolvent is at most ``2 + 0.3``."""

    @_quiet
    def run():
        slopes = []
        for nx in meshes:
            mesh = build_mesh(p, nx)
            sys = assemble_generator(p, mesh, nrho)
            grid = lambda_grid(1.0, mesh.resolution_limit(), samples, spacing="log")
            slopes.append(fit_growth_exponent(resolvent_sweep(sys, grid), 1.0))
        incs = [slopes[i + 1] - slopes[i] for i in range(len(slopes) - 1)]
        ok = all(s <= max_slope for s in slopes) and all(d <= max_increase for d in incs)
        return ok, {"meshes": list(meshes), "slopes": slopes, "increase": incs,
                    "max_slope": max_slope, "max_increase": max_increase}

    return _timed("C5", "resolvent growth exponent", run)


def criterion_decay(p: ModelParams, nx=200, nrho=16, dt=1e-2, T=50.0, window=(5.0, 50.0),
                    min_p=0.9) -> CriterionResult:
    """Energy of smooth compatible data decays at least like ``t^-0.9`` before the floor."""

    @_quiet
    def run():
        mesh = build_mesh(p, nx)
        sys = assemble_generator(p, mesh, nrho)
        U0 = build_initial_state(p, mesh, InitialPreset(kind="sine_mode", history="frozen_velocity"), nrho)
        trace = simulate(sys, U0, dt, T)
        fit = fit_decay_exponent(trace, window)
        d = fit.to_dict()
        d["graph_norm_sq"] = graph_norm_sq(sys, U0)
        d["min_p"] = min_p
        return fit.p >= min_p, d

    return _timed("C6", "polynomial decay exponent", run)


def criterion_equivalence(p: ModelParams, nx=100, dts=(1e-2, 5e-3), nrhos=(16, 32), horizon=5.0,
                          factor=5.0, max_ratio=0.75, omega=3.0) -> CriterionResult:
    """Transport and method-of-steps trajectories agree to ``O(dt + drho)``."""

    @_quiet
    def run():
        mesh = build_mesh(p, nx)
        preset = InitialPreset(kind="sine_mode", history="sine_in_time", omega=omega)
        T = horizon * p.tau
        errs = {}
        ok = True
        cases = []
        for dt in dts:
            ref = simulate_method_of_steps(p, mesh, preset, dt, T, snapshot_every=1)
            for nrho in nrhos:
                sys = assemble_generator(p, mesh, nrho)
                U0 = build_initial_state(p, mesh, preset, nrho)
                tr = simulate(sys, U0, dt, T, snapshot_every=1)
                W = sys.M_h[sys.wave_slice(), sys.wave_slice()]
                err = 0.0
                for (_, a), (_, b) in zip(tr.snapshots, ref.snapshots):
                    dlt = a.pack()[sys.wave_slice()] - b.pack()
                    err = max(err, float(np.sqrt(dlt @ (W @ dlt))))
                bound = factor * (dt + 1.0 / nrho) * np.sqrt(energy_norm_sq(sys, U0))
                ok &= err <= bound
                errs[(dt, nrho)] = err
                cases.append({"dt": dt, "nrho": nrho, "error": err, "bound": bound})
        coarse, fine = (dts[0], nrhos[0]), (dts[-1], nrhos[-1])
        ratio = errs[fine] / errs[coarse] if errs[coarse] > 0 else 0.0
        shrink = ratio <= max_ratio
        return ok and shrink, {"cases": cases, "refinement_ratio": ratio, "max_ratio": max_ratio}

    return _timed("C7", "reformulation equivalence", run)


def criterion_eigen_convergence(p: ModelParams, meshes=(100, 200), n_modes=10, lo=3.5, hi=4.5) -> CriterionResult:
    """Undamped eigenvalue errors drop by ~4 when the mesh is doubled."""

    @_quiet
    def run():
        pv = validation_params(p)
        kmax = n_modes
        exact = np.sort(np.concatenate([np.arange(1, kmax + 1) * np.pi * np.sqrt(pv.a) / pv.L,
                                        np.arange(1, kmax + 1) * np.pi / pv.L]))[:n_modes]
        errs = []
        for nx in meshes:
            ev = eigenvalues(assemble_generator(pv, build_mesh(pv, nx), 2)).eigenvalues
            w = ev[(ev.imag > 1e-3) & (np.abs(ev.real) < 1e-6)]
            errs.append(np.abs(np.sort(w.imag)[:n_modes] - exact))
        ratios = errs[0] / errs[1]
        ok = bool(np.all((ratios >= lo) & (ratios <= hi)))
        return ok, {"meshes": list(meshes), "ratios": ratios.tolist(), "bounds": [lo, hi],
                    "errors_fine": errs[-1].tolist()}

    return _timed("C8", "discretization convergence", run)


QUICK = {
    "C1": dict(meshes=(20, 40), nrhos=(4, 8), n_states=50),
    "C2": dict(nx=40, nrho=8, T=10.0),
    "C3": dict(meshes=(20, 40), nrhos=(4, 8)),
    "C4": dict(nx=40, nrho=8, samples=50, validation_meshes=(20, 40, 80)),
    "C5": dict(meshes=(40, 80), nrho=8, samples=60),
    "C6": dict(nx=80, nrho=8, T=30.0, window=(5.0, 30.0)),
    "C7": dict(nx=40),
    "C8": dict(meshes=(40, 80)),
}

CRITERIA = {
    "C1": criterion_dissipativity,
    "C2": criterion_monotonicity,
    "C3": criterion_kernel,
    "C4": criterion_axis_gap,
    "C5": criterion_resolvent_growth,
    "C6": criterion_decay,
    "C7": criterion_equivalence,
    "C8": criterion_eigen_convergence,
}


def run_all(p: ModelParams, quick: bool = False, only=None, progress=None) -> list:
    results = []
    for key, fn in CRITERIA.items():
        if only and key not in only:
            continue
        kwargs = QUICK.get(key, {}) if quick else {}
        try:
            res = fn(p, **kwargs)
        except Exception as exc:  # report, don't abort the suite
            res = CriterionResult(key, fn.__doc__.strip().splitlines()[0], False,
                                  {"error": f"{type(exc).__name__}: {exc}"})
        results.append(res)
        if progress:
            progress(res)
    return results
