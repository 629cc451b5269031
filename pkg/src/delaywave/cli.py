"""Command-line front end: ``delaywave {simulate,spectrum,resolvent,verify}``.

Exit codes: 0 success / all criteria pass, 1 a criterion failed,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import CRITERIA, run_all
from .diagnostics import check_dissipation, fit_decay_exponent
from .discretize import build_mesh
from .evolve import SCHEMES, simulate
from .exceptions import DelayWaveError
from .generator import assemble_generator
from .io import write_json, write_resolvent_csv, write_snapshot_csv, write_spectrum_csv
from .model import HypothesisWarning, InitialPreset, ModelParams, format_config, load_config, validate_params
from .spectral import eigenvalues, fit_growth_exponent, lambda_grid, resolvent_sweep

log = logging.getLogger("delaywave")


class UsageError(Exception):
    pass


def _load(args) -> ModelParams:
    p = load_config(args.config) if args.config else ModelParams()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", HypothesisWarning)
        validate_params(p)
    for w in caught:
        log.warning("%s", w.message)
    return p


def _manifest(command, p, sizes, outputs, started, summary, extra=None) -> dict:
    m = {
        "command": command,
        "version": __version__,
        "config": p.to_dict(),
        "config_text": format_config(p),
        "sizes": sizes,
        "started_at": started[0].isoformat(timespec="seconds"),
        "wall_clock_s": round(time.perf_counter() - started[1], 3),
        "outputs": [str(o.name) for o in outputs],
        "summary": summary,
    }
    if extra:
        m.update(extra)
    return m


def _finish(out: Path, manifest: dict, outputs) -> Path:
    for o in outputs:
        if not o.exists() or o.stat().st_size == 0:
            raise DelayWaveError(f"output {o} missing or empty")
    return write_json(out / "manifest.json", manifest)


def _read_nodal(path, mesh) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if reader.fieldnames is None or not {"u", "v", "y", "z"} <= set(reader.fieldnames):
        raise UsageError(f"{path}: expected columns x,u,v,y,z")
    data = np.array([[float(r[k]) for k in ("u", "v", "y", "z")] for r in rows]).T
    if data.shape[1] == mesh.nodes.size:
        data = data[:, 1:-1]
    return data


def _preset(args, mesh) -> InitialPreset:
    nodal = None
    kind = args.preset
    if args.nodal_file:
        kind = "custom_nodal"
        nodal = _read_nodal(args.nodal_file, mesh)
    return InitialPreset(kind=kind, k_u=args.k_u, k_y=args.k_y, center=args.center, width=args.width,
                         which_field=args.field, nodal=nodal, history=args.history, omega=args.omega)


# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .model import build_initial_state

    p = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = (_dt.datetime.now(), time.perf_counter())
    mesh = build_mesh(p, args.nx)
    sys_ = assemble_generator(p, mesh, args.nrho)
    U0 = build_initial_state(p, mesh, _preset(args, mesh), args.nrho)
    trace = simulate(sys_, U0, args.dt, args.T, scheme=args.scheme, snapshot_every=args.snapshot_every)
    outputs = []
    energy = out / "energy.csv"
    trace.to_csv(energy)
    outputs.append(energy)
    for k, (t, state) in enumerate(trace.snapshots):
        outputs.append(write_snapshot_csv(out / f"snapshot_{k:05d}.csv", mesh, state))
    summary = {"E0": float(trace.E[0]), "E_final": float(trace.E[-1]),
               "monotone": bool(np.all(np.diff(trace.E) <= 1e-8 * trace.E[0]))}
    if args.scheme == "backward_euler":
        summary["energy_law"] = check_dissipation(trace, sys_).to_dict()
    sizes = {"nx": mesh.n_cells, "n_int": mesh.n_int, "m_eta": mesh.m_eta, "nrho": args.nrho, "dim": sys_.dim,
             "dt": args.dt, "T": args.T, "scheme": args.scheme}
    _finish(out, _manifest("simulate", p, sizes, outputs, started, summary), outputs)
    print(f"wrote {len(outputs)} file(s) to {out}")
    return 0


def cmd_spectrum(args) -> int:
    p = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = (_dt.datetime.now(), time.perf_counter())
    mesh = build_mesh(p, args.nx)
    sys_ = assemble_generator(p, mesh, args.nrho)
    spec = eigenvalues(sys_)
    outputs = [write_spectrum_csv(out / "spectrum.csv", spec.eigenvalues)]
    summary = spec.summary()
    outputs.append(write_json(out / "spectrum_summary.json", summary))
    sizes = {"nx": mesh.n_cells, "nrho": args.nrho, "dim": sys_.dim}
    _finish(out, _manifest("spectrum", p, sizes, outputs, started, summary), outputs)
    print(f"spectral abscissa {summary['spectral_abscissa']:.6e}")
    return 0


def cmd_resolvent(args) -> int:
    p = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = (_dt.datetime.now(), time.perf_counter())
    mesh = build_mesh(p, args.nx)
    sys_ = assemble_generator(p, mesh, args.nrho)
    limit = mesh.resolution_limit()
    lmax = args.lmax if args.lmax is not None else limit
    warnings_ = []
    if lmax > limit:
        warnings_.append(f"lmax={lmax} exceeds mesh resolution limit {limit:.6g}; sweep clipped")
        log.warning(warnings_[-1])
        lmax = limit
    if args.lmin > lmax:
        raise UsageError(f"lmin={args.lmin} exceeds lmax={lmax}")
    grid = lambda_grid(args.lmin, lmax, args.samples, spacing=args.spacing)
    samples = resolvent_sweep(sys_, grid, method=args.method, workers=args.threads)
    outputs = [write_resolvent_csv(out / "resolvent.csv", samples)]
    fit_min = max(args.lmin, 1.0)
    try:
        slope = fit_growth_exponent(samples, fit_min)
        fit = {"slope": slope, "lambda_min": fit_min, "lambda_max": float(lmax), "samples": len(samples)}
    except DelayWaveError as exc:
        fit = {"slope": None, "lambda_min": fit_min, "lambda_max": float(lmax), "samples": len(samples),
               "note": str(exc)}
    outputs.append(write_json(out / "growth_fit.json", fit))
    summary = {"min_sigma_min": min(s.sigma_min for s in samples), "slope": fit["slope"]}
    sizes = {"nx": mesh.n_cells, "nrho": args.nrho, "dim": sys_.dim, "samples": len(samples),
             "method": args.method}
    _finish(out, _manifest("resolvent", p, sizes, outputs, started, summary, {"warnings": warnings_}), outputs)
    print(f"min sigma_min {summary['min_sigma_min']:.6e}, envelope slope {fit['slope']}")
    return 0


def cmd_verify(args) -> int:
    p = _load(args)
    only = set(args.only.split(",")) if args.only else None
    if only and not only <= set(CRITERIA):
        raise UsageError(f"unknown criteria {sorted(only - set(CRITERIA))}; choose from {sorted(CRITERIA)}")
    results = run_all(p, quick=args.quick, only=only, progress=lambda r: print(r.line(), flush=True))
    ok = all(r.passed for r in results)
    report = {"pass": ok, "quick": args.quick, "config": p.to_dict(), "criteria": [r.to_dict() for r in results]}
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "verify_report.json", report)
    failed = [r.key for r in results if not r.passed]
    print("ALL PASS" if ok else f"FAILED: {', '.join(failed)}")
    return 0 if ok else 1


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delaywave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, nx, nrho, out=True):
        sp.add_argument("config", nargs="?", help="key = value parameter file (defaults if omitted)")
        sp.add_argument("--nx", type=int, default=nx, help="target cell count")
        sp.add_argument("--nrho", type=int, default=nrho, help="delay levels")
        if out:
            sp.add_argument("--out-dir", default="out")

    s = sub.add_parser("simulate", help="time integration, writes energy.csv")
    common(s, 200, 16)
    s.add_argument("--dt", type=float, default=1e-2)
    s.add_argument("--T", type=float, default=50.0)
    s.add_argument("--scheme", choices=SCHEMES, default="backward_euler")
    s.add_argument("--preset", choices=("zero", "sine_mode", "bump"), default="sine_mode")
    s.add_argument("--history", choices=("zero", "frozen_velocity", "sine_in_time"), default="frozen_velocity")
    s.add_argument("--k-u", type=int, default=1)
    s.add_argument("--k-y", type=int, default=1)
    s.add_argument("--center", type=float, default=0.25)
    s.add_argument("--width", type=float, default=0.2)
    s.add_argument("--field", choices=("u", "v", "y", "z"), default="v")
    s.add_argument("--omega", type=float, default=1.0)
    s.add_argument("--nodal-file", help="CSV with columns x,u,v,y,z (custom initial data)")
    s.add_argument("--snapshot-every", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("spectrum", help="dense spectrum, writes spectrum.csv")
    common(s, 50, 8)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("resolvent", help="resolvent sweep, writes resolvent.csv and growth_fit.json")
    common(s, 100, 16)
    s.add_argument("--lmin", type=float, default=1.0)
    s.add_argument("--lmax", type=float, default=None, help="defaults to the mesh resolution limit")
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--spacing", choices=("log", "lin"), default="log")
    s.add_argument("--method", choices=("sparse", "dense"), default="sparse")
    s.add_argument("--threads", type=int, default=None, help="overrides DELAYWAVE_THREADS")
    s.set_defaults(func=cmd_resolvent)

    s = sub.add_parser("verify", help="run the acceptance criteria")
    s.add_argument("config", nargs="?")
    s.add_argument("--quick", action="store_true", help="reduced sizes for a smoke run")
    s.add_argument("--only", help="comma-separated subset, e.g. C1,C4")
    s.add_argument("--out-dir", default=None)
    s.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "samples", 1) is not None and getattr(args, "samples", 1) < 1:
        parser.error("--samples must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"delaywave: error: {exc}", file=sys.stderr)
        return 2
    except (DelayWaveError, OSError) as exc:
        code = 2 if isinstance(exc, (ValueError, OSError)) else 1
        print(f"delaywave: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
