import warnings

import numpy as np
import pytest

from delaywave.discretize import build_mesh
from delaywave.exceptions import FitError
from delaywave.generator import assemble_generator
from delaywave.model import ModelParams
from delaywave.spectral import (
    EnergyFactor,
    ResolventSample,
    eigenvalues,
    fit_growth_exponent,
    lambda_grid,
    resolvent_norm,
    resolvent_sweep,
)

from .conftest import undamped


@pytest.fixture(scope="module")
def sys40():
    p = ModelParams()
    return assemble_generator(p, build_mesh(p, 40), 8)


def _undamped_system(nx, nrho=2):
    p = undamped()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return assemble_generator(p, build_mesh(p, nx), nrho)


def test_energy_factor(sys40, rng):
    fac = EnergyFactor(sys40.M_h)
    x = rng.standard_normal(sys40.dim)
    Mh = sys40.M_h
    np.testing.assert_allclose(fac.RT(fac.R(x)), Mh @ x, rtol=1e-10, atol=1e-10 * np.abs(Mh @ x).max())
    np.testing.assert_allclose(fac.R(fac.R_solve(x)), x, rtol=1e-10)
    np.testing.assert_allclose(fac.RT(fac.RT_solve(x)), x, rtol=1e-10)


def test_spectrum_conjugate_and_stable(sys40):
    spec = eigenvalues(sys40)
    ev = spec.eigenvalues
    assert ev.size == sys40.dim
    gap = np.abs(ev[:, None] - ev.conj()[None, :]).min(axis=1)
    assert gap.max() < 1e-7 * np.abs(ev).max()
    assert spec.spectral_abscissa < 0
    assert spec.min_axis_distance > 0


def test_shift_invert_matches_dense(sys40):
    dense = eigenvalues(sys40).eigenvalues
    for mu in eigenvalues(sys40, targets=[3j, 10j], k=4).eigenvalues:
        assert np.min(np.abs(dense - mu)) < 1e-7 * max(1, abs(mu))


def test_undamped_spectrum_analytic():
    # Dirichlet waves on (0,1): +-i k pi sqrt(a) / L, P1 error O(h^2)
    spec = eigenvalues(_undamped_system(40))
    ev = spec.eigenvalues
    waves = ev[ev.imag > 1e-3]
    assert np.abs(waves.real).max() < 1e-8
    lowest = np.sort(waves.imag)[:6]
    expected = np.repeat(np.arange(1, 4) * np.pi, 2)
    # consistent-mass P1 overestimates frequencies by a relative (omega h)^2 / 24
    h = 1 / 40
    rel = lowest / expected - 1
    np.testing.assert_allclose(rel, (expected * h) ** 2 / 24, rtol=0.05)


def test_resolvent_dense_matches_sparse(sys40):
    for lam in (0.0, 2.0, 17.5, 60.0):
        a = resolvent_norm(sys40, lam).sigma_min
        b = resolvent_norm(sys40, lam, method="dense").sigma_min
        assert a == pytest.approx(b, rel=1e-8)


def test_resolvent_at_zero_finite(sys40):
    s = resolvent_norm(sys40, 0.0)
    assert np.isfinite(s.res_norm) and s.sigma_min > 0
    assert s.res_norm * s.sigma_min == pytest.approx(1.0)


def test_resolvent_conjugation_symmetry(sys40):
    for lam in (1.3, 9.0):
        assert resolvent_norm(sys40, -lam).res_norm == pytest.approx(resolvent_norm(sys40, lam).res_norm, rel=1e-9)


def test_resolvent_lower_bound(sys40):
    ev = eigenvalues(sys40).eigenvalues
    for lam in np.linspace(0.5, 50, 12):
        s = resolvent_norm(sys40, lam)
        assert s.res_norm >= 1.0 / np.min(np.abs(1j * lam - ev)) * (1 - 1e-8)


def test_undamped_gap_closes():
    sig = [resolvent_norm(_undamped_system(n), np.pi).sigma_min for n in (20, 40, 80)]
    assert sig[0] / sig[1] == pytest.approx(4.0, rel=0.05)
    assert sig[1] / sig[2] == pytest.approx(4.0, rel=0.05)


def test_mesh_refinement_stability():
    p = ModelParams()
    for lam in (0.0, 2.0, 8.0):
        a = resolvent_norm(assemble_generator(p, build_mesh(p, 100), 16), lam).sigma_min
        b = resolvent_norm(assemble_generator(p, build_mesh(p, 200), 16), lam).sigma_min
        assert abs(a - b) / b < 0.1


def test_sweep_order_and_determinism(sys40, monkeypatch):
    grid = lambda_grid(0.5, 40, 12, "lin")
    monkeypatch.setenv("DELAYWAVE_THREADS", "3")
    par = resolvent_sweep(sys40, grid)
    ser = resolvent_sweep(sys40, grid, workers=1)
    assert [s.lam for s in par] == list(grid)
    assert par == ser
    single = [resolvent_norm(sys40, lam) for lam in grid]
    assert par == single


def test_sweep_single_zero(sys40):
    out = resolvent_sweep(sys40, [0.0])
    assert len(out) == 1 and np.isfinite(out[0].res_norm)


def test_sweep_gap_under_hypothesis(sys40):
    grid = lambda_grid(0.0, build_mesh(ModelParams(), 40).resolution_limit(), 40, "lin")
    assert min(s.sigma_min for s in resolvent_sweep(sys40, grid)) > 0


def test_axis_distance_shrinks_with_coupling():
    dist = []
    for c0 in (2.0, 0.5, 0.1, 0.02):
        p = ModelParams(c0=c0)
        dist.append(eigenvalues(assemble_generator(p, build_mesh(p, 30), 4)).min_axis_distance)
    assert all(d > 0 for d in dist)
    assert dist[-1] < dist[0]
    assert dist[-1] == min(dist)


def _synthetic(f, lams):
    return [ResolventSample(lam=l, sigma_min=1 / f(l), res_norm=f(l)) for l in lams]


def test_fit_power_law():
    lams = np.geomspace(1, 100, 30)
    assert fit_growth_exponent(_synthetic(lambda l: l ** 2, lams), 1.0) == pytest.approx(2.0, abs=1e-12)
    assert fit_growth_exponent(_synthetic(lambda l: 3.0, lams), 1.0) == pytest.approx(0.0, abs=1e-12)


def test_fit_uses_envelope():
    lams = np.geomspace(1, 100, 40)
    # a decaying tail after a peak: the running maximum is flat there
    samples = _synthetic(lambda l: l if l < 10 else 10 * (10 / l), lams)
    slope = fit_growth_exponent(samples, 1.0)
    assert 0 < slope < 1


def test_fit_errors():
    with pytest.raises(FitError):
        fit_growth_exponent(_synthetic(lambda l: l, [1, 2, 3, 4]), 1.0)
    with pytest.raises(FitError):
        fit_growth_exponent(_synthetic(lambda l: l, np.linspace(0.1, 0.9, 10)), 1.0)
