import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from delaywave.discretize import build_mesh
from delaywave.exceptions import (
    ConfigError,
    DomainError,
    GeometryError,
    HypothesisError,
    ParameterError,
    ShapeError,
)
from delaywave.model import (
    HypothesisWarning,
    InitialPreset,
    ModelParams,
    build_initial_state,
    eval_b,
    eval_c,
    format_config,
    parse_config,
    validate_params,
)

REF = dict(L=1, a=1, kappa1=1, kappa2=0.5, tau=0.1, alpha=0.2, beta=0.5, gamma=0.7, c0=1)


def test_validate_accepts_reference():
    p = ModelParams(**REF)
    assert validate_params(p) is p
    assert p.satisfies_hypothesis


def test_validate_hypothesis_error():
    with pytest.raises(HypothesisError):
        validate_params(ModelParams(**{**REF, "kappa2": 1.5}))


def test_validate_geometry_error():
    with pytest.raises(GeometryError):
        validate_params(ModelParams(**{**REF, "alpha": 0.6}))


@pytest.mark.parametrize("key", ["L", "a", "tau", "c0"])
def test_validate_nonpositive(key):
    with pytest.raises(ParameterError):
        validate_params(ModelParams(**{**REF, key: 0.0}))


def test_validate_warns_outside_hypothesis():
    p = ModelParams(**{**REF, "kappa2": 1.5, "enforce_H": False})
    with pytest.warns(HypothesisWarning):
        assert validate_params(p) is p
    assert not p.satisfies_hypothesis


def test_kappa2_zero_violates_hypothesis():
    with pytest.raises(HypothesisError):
        validate_params(ModelParams(**{**REF, "kappa2": 0.0}))


@pytest.mark.parametrize("x, expected", [(0.25, 1.0), (0.75, 0.0), (0.5, 0.0), (0.0, 1.0)])
def test_eval_b(x, expected):
    assert eval_b(ModelParams(**REF), x) == expected


@pytest.mark.parametrize("x, expected", [(0.4, 3.0), (0.1, 0.0), (0.2, 3.0), (0.7, 0.0), (0.9, 0.0)])
def test_eval_c(x, expected):
    # right-limit convention: c(alpha) = c0, c(gamma) = 0
    p = ModelParams(**{**REF, "c0": 3.0})
    assert eval_c(p, x) == expected


def test_eval_c_breakpoint_alpha_right_limit():
    p = ModelParams(**{**REF, "c0": 3.0})
    assert eval_c(p, 0.2) == eval_c(p, 0.2 + 1e-12)


def test_domain_error():
    with pytest.raises(DomainError):
        eval_b(ModelParams(), 1.5)
    with pytest.raises(DomainError):
        eval_c(ModelParams(), -0.1)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_coefficients_piecewise_constant(x1, x2):
    p = ModelParams()
    pieces = [0.0, p.alpha, p.beta, p.gamma, p.L]
    i1 = np.searchsorted(pieces, x1, side="right")
    i2 = np.searchsorted(pieces, x2, side="right")
    if i1 == i2 and x1 not in pieces and x2 not in pieces:
        assert eval_b(p, x1) == eval_b(p, x2)
        assert eval_c(p, x1) == eval_c(p, x2)


def test_config_roundtrip():
    p = ModelParams(kappa2=-0.25, tau=0.3, enforce_H=False)
    assert parse_config(format_config(p)) == p


def test_config_comments_and_defaults():
    p = parse_config("# comment\n\nkappa2 = 0.3  # trailing\nenforce_H = yes\n")
    assert p.kappa2 == 0.3 and p.enforce_H and p.L == 1.0


@pytest.mark.parametrize(
    "text, line",
    [("L = 1\nfoo = 2\n", 2), ("kappa1 = abc\n", 1), ("L 1\n", 1), ("\n\nenforce_H = maybe\n", 3),
     ("L = 1\nL = 2\n", 2)],
)
def test_config_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.lineno == line


def _mesh_state(preset, nrho=8):
    p = ModelParams()
    mesh = build_mesh(p, 20)
    return p, mesh, build_initial_state(p, mesh, preset, nrho)


def test_zero_preset():
    _, _, U = _mesh_state(InitialPreset(kind="zero"))
    assert not np.any(U.pack())


def test_frozen_velocity_levels():
    p, mesh, U = _mesh_state(InitialPreset(kind="sine_mode", history="frozen_velocity"))
    expected = np.sin(np.pi * mesh.eta_nodes)
    for level in U.eta:
        np.testing.assert_array_equal(level, expected)
    # compatibility: implicit level 0 is v on (0, beta]
    np.testing.assert_array_equal(U.v[: mesh.m_eta], expected)


def test_sine_in_time_history():
    omega = 2.7
    nrho = 8
    p, mesh, U = _mesh_state(InitialPreset(kind="sine_mode", history="sine_in_time", omega=omega), nrho)
    for j in range(1, nrho + 1):
        rho = j / nrho
        for i, x in enumerate(mesh.eta_nodes):
            ref = math.sin(math.pi * x) * math.cos(-omega * rho * p.tau)
            assert U.eta[j - 1, i] == pytest.approx(ref, rel=1e-14, abs=1e-15)


def test_bump_support():
    p, mesh, U = _mesh_state(InitialPreset(kind="bump", center=0.8, width=0.2, which_field="y"))
    assert not np.any(U.u) and not np.any(U.v) and not np.any(U.z)
    x = mesh.interior
    assert np.all(np.abs(U.y[(x <= 0.7) | (x >= 0.9)]) < 1e-15)
    assert U.y.max() == pytest.approx(1.0)


def test_bump_outside_domain():
    with pytest.raises(ParameterError):
        _mesh_state(InitialPreset(kind="bump", center=0.05, width=0.2))


def test_custom_nodal_shape():
    p = ModelParams()
    mesh = build_mesh(p, 20)
    good = np.arange(4 * mesh.n_int, dtype=float).reshape(4, -1)
    U = build_initial_state(p, mesh, InitialPreset(kind="custom_nodal", nodal=good), 4)
    np.testing.assert_array_equal(U.z, good[3])
    with pytest.raises(ShapeError):
        build_initial_state(p, mesh, InitialPreset(kind="custom_nodal", nodal=good[:, :-1]), 4)


def test_preset_mode_index():
    with pytest.raises(ParameterError):
        InitialPreset(kind="sine_mode", k_u=0)
