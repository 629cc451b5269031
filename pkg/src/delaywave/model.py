"""Continuous model: physical constants, piecewise coefficients, initial data.

The system is a pair of 1-D waves on ``(0, L)`` with Dirichlet ends; the
first carries Kelvin-Voigt damping ``kappa1`` and a delayed Kelvin-Voigt
term ``kappa2`` (delay ``tau``) on ``(0, beta)``, and the two are coupled
through ``c0`` on ``(alpha, gamma)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from .exceptions import (
    ConfigError,
    DomainError,
    GeometryError,
    HypothesisError,
    ParameterError,
    ShapeError,
)
from .state import StateVector

if TYPE_CHECKING:
    from .discretize import Mesh

CONFIG_KEYS = ("L", "a", "kappa1", "kappa2", "tau", "alpha", "beta", "gamma", "c0", "enforce_H")


class HypothesisWarning(UserWarning):
    """Raised (as a warning) when running outside ``|kappa2| < kappa1``."""


@dataclass(frozen=True)
class ModelParams:
    L: float = 1.0
    a: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 0.5
    tau: float = 0.1
    alpha: float = 0.2
    beta: float = 0.5
    gamma: float = 0.7
    c0: float = 1.0
    enforce_H: bool = True

    @property
    def satisfies_hypothesis(self) -> bool:
        return self.kappa1 > 0 and self.kappa2 != 0 and abs(self.kappa2) < self.kappa1

    @property
    def dissipation_rate(self) -> float:
        """``kappa1 - |kappa2|``; negative outside the hypothesis."""
        return self.kappa1 - abs(self.kappa2)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def validate_params(p: ModelParams) -> ModelParams:
    """Check every invariant of ``p`` and return it unchanged.

    With ``enforce_H=False`` a violated hypothesis only emits a
    :class:`HypothesisWarning`; ``p.satisfies_hypothesis`` carries the flag.
    ``c0 = 0`` and vanishing damping are tolerated in that mode so the
    undamped, uncoupled wave spectrum can be used for validation.
    """
    for name in ("L", "a", "tau"):
        val = getattr(p, name)
        if not (math.isfinite(val) and val > 0):
            raise ParameterError(f"{name} must be positive, got {val!r}")
    if not math.isfinite(p.c0) or p.c0 < 0 or (p.enforce_H and p.c0 == 0):
        raise ParameterError(f"c0 must be positive, got {p.c0!r}")
    if not (0 < p.alpha < p.beta < p.gamma < p.L):
        raise GeometryError(
            f"need 0 < alpha < beta < gamma < L, got alpha={p.alpha}, beta={p.beta}, gamma={p.gamma}, L={p.L}"
        )
    if not (math.isfinite(p.kappa1) and math.isfinite(p.kappa2)):
        raise ParameterError("kappa1 and kappa2 must be finite")
    if not p.satisfies_hypothesis:
        msg = f"hypothesis 0 < |kappa2| < kappa1 violated (kappa1={p.kappa1}, kappa2={p.kappa2})"
        if p.enforce_H:
            raise HypothesisError(msg)
        warnings.warn(msg, HypothesisWarning, stacklevel=2)
    return p


def _check_domain(p: ModelParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > p.L):
        raise DomainError(f"abscissa outside [0, {p.L}]")
    return x


def eval_b(p: ModelParams, x):
    """Damping indicator: 1 on ``[0, beta)``, 0 on ``[beta, L]`` (right-limit at beta)."""
    x = _check_domain(p, x)
    out = np.where(x < p.beta, 1.0, 0.0)
    return out if out.ndim else float(out)


def eval_c(p: ModelParams, x):
    """Coupling coefficient: ``c0`` on ``[alpha, gamma)``, 0 elsewhere."""
    x = _check_domain(p, x)
    out = np.where((x >= p.alpha) & (x < p.gamma), p.c0, 0.0)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# config files


def _parse_bool(text: str, lineno: int) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {text!r}", lineno)


def parse_config(text: str) -> ModelParams:
    """Parse ``key = value`` lines (``#`` starts a comment) into params.

    Missing keys take the :class:`ModelParams` defaults.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if key == "enforce_H":
            values[key] = _parse_bool(val, lineno)
        else:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigError(f"cannot parse number {val!r} for {key}", lineno) from None
    return ModelParams(**values)


def load_config(path) -> ModelParams:
    return parse_config(Path(path).read_text())


def format_config(p: ModelParams) -> str:
    lines = []
    for key in CONFIG_KEYS:
        val = getattr(p, key)
        lines.append(f"{key} = {str(val).lower() if isinstance(val, bool) else repr(float(val))}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# initial data

_KINDS = ("zero", "sine_mode", "bump", "custom_nodal")
_HISTORIES = ("zero", "frozen_velocity", "sine_in_time")
_FIELDS = ("u", "v", "y", "z")


@dataclass(frozen=True)
class InitialPreset:
    """Initial displacement/velocity data and the velocity history on ``(-tau, 0)``.

    ``sine_mode`` sets ``u = v = sin(k_u pi x / L)`` and
    ``y = z = sin(k_y pi x / L)``.  ``bump`` puts a ``cos^2`` bump of
    full width ``width`` centred at ``center`` into ``which_field``.
    ``custom_nodal`` takes an array of shape ``(4, n_int)`` holding
    ``u, v, y, z`` at interior nodes.

    The history ``f0(x, s)`` for ``s`` in ``(-tau, 0)``: ``zero``,
    ``frozen_velocity`` (``f0 = v0``) or ``sine_in_time``
    (``f0 = v0 cos(omega s)``).
    """

    kind: str = "sine_mode"
    k_u: int = 1
    k_y: int = 1
    center: float = 0.25
    width: float = 0.2
    which_field: str = "v"
    nodal: Optional[np.ndarray] = field(default=None, compare=False)
    history: str = "frozen_velocity"
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown preset kind {self.kind!r}; choose from {_KINDS}")
        if self.history not in _HISTORIES:
            raise ParameterError(f"unknown history {self.history!r}; choose from {_HISTORIES}")
        if self.k_u < 1 or self.k_y < 1:
            raise ParameterError("mode indices must be >= 1")
        if self.which_field not in _FIELDS:
            raise ParameterError(f"which_field must be one of {_FIELDS}")
        if self.kind == "bump" and self.width <= 0:
            raise ParameterError("bump width must be positive")


def _bump(x: np.ndarray, center: float, width: float) -> np.ndarray:
    s = (x - center) / width
    return np.where(np.abs(s) < 0.5, np.cos(np.pi * s) ** 2, 0.0)


def initial_fields(p: ModelParams, mesh: "Mesh", preset: InitialPreset):
    """Return interior nodal ``(u0, v0, y0, z0)`` for ``preset``."""
    x = mesh.interior
    n = x.size
    zero = np.zeros(n)
    if preset.kind == "zero":
        return zero, zero.copy(), zero.copy(), zero.copy()
    if preset.kind == "sine_mode":
        su = np.sin(preset.k_u * np.pi * x / p.L)
        sy = np.sin(preset.k_y * np.pi * x / p.L)
        return su, su.copy(), sy, sy.copy()
    if preset.kind == "bump":
        lo, hi = preset.center - preset.width / 2, preset.center + preset.width / 2
        if not (0 < lo and hi < p.L):
            raise ParameterError(f"bump support ({lo}, {hi}) not inside (0, {p.L})")
        out = {name: zero.copy() for name in _FIELDS}
        out[preset.which_field] = _bump(x, preset.center, preset.width)
        return out["u"], out["v"], out["y"], out["z"]
    nodal = np.asarray(preset.nodal, dtype=float)
    if nodal.shape != (4, n):
        raise ShapeError(f"custom_nodal data has shape {nodal.shape}, expected (4, {n})")
    return tuple(nodal[i].copy() for i in range(4))


def history_function(p: ModelParams, preset: InitialPreset, v0: np.ndarray) -> Callable[[float], np.ndarray]:
    """Return ``s -> f0(., s)`` at interior nodes, for ``s`` in ``[-tau, 0]``."""
    if preset.history == "zero":
        return lambda s: np.zeros_like(v0)
    if preset.history == "frozen_velocity":
        return lambda s: v0.copy()
    omega = preset.omega
    return lambda s: v0 * math.cos(omega * s)


def build_initial_state(p: ModelParams, mesh: "Mesh", preset: InitialPreset, nrho: int) -> StateVector:
    """Sample ``preset`` on ``mesh``; delay level ``j`` gets ``f0(x, -j tau / nrho)``."""
    u, v, y, z = initial_fields(p, mesh, preset)
    f0 = history_function(p, preset, v)
    m = mesh.m_eta
    eta = np.empty((nrho, m))
    for j in range(1, nrho + 1):
        eta[j - 1] = f0(-j * p.tau / nrho)[:m]
    return StateVector(u=u, v=v, y=y, z=z, eta=eta)
