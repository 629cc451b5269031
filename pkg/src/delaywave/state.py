"""Packed discrete state ``(u, v, y, z, eta)``.

Layout of the flat vector::

    [u (n) | v (n) | y (n) | z (n) | eta_1 (m) | ... | eta_nrho (m)]

``n`` is the number of interior mesh nodes and ``m`` the number of nodes in
``(0, beta]``.  The delay level ``rho = 0`` is not stored: it coincides with
``v`` restricted to ``(0, beta]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeError


@dataclass
class StateVector:
    u: np.ndarray
    v: np.ndarray
    y: np.ndarray
    z: np.ndarray
    eta: np.ndarray  # shape (nrho, m)

    def __post_init__(self):
        n = np.shape(self.u)[0]
        for name in ("v", "y", "z"):
            if np.shape(getattr(self, name)) != (n,):
                raise ShapeError(f"field {name!r} has shape {np.shape(getattr(self, name))}, expected ({n},)")
        if np.ndim(self.eta) != 2:
            raise ShapeError(f"eta must be 2-D (nrho, m), got shape {np.shape(self.eta)}")

    @property
    def n_int(self) -> int:
        return self.u.shape[0]

    @property
    def nrho(self) -> int:
        return self.eta.shape[0]

    @property
    def m_eta(self) -> int:
        return self.eta.shape[1]

    @property
    def size(self) -> int:
        return 4 * self.n_int + self.eta.size

    def pack(self) -> np.ndarray:
        return np.concatenate([self.u, self.v, self.y, self.z, self.eta.ravel()])

    @classmethod
    def unpack(cls, x, n_int: int, m_eta: int, nrho: int) -> "StateVector":
        x = np.asarray(x)
        expected = 4 * n_int + m_eta * nrho
        if x.shape != (expected,):
            raise ShapeError(f"state vector has shape {x.shape}, expected ({expected},)")
        n = n_int
        return cls(
            u=x[:n].copy(),
            v=x[n:2 * n].copy(),
            y=x[2 * n:3 * n].copy(),
            z=x[3 * n:4 * n].copy(),
            eta=x[4 * n:].reshape(nrho, m_eta).copy(),
        )

    @classmethod
    def zeros(cls, n_int: int, m_eta: int, nrho: int, dtype=float) -> "StateVector":
        return cls.unpack(np.zeros(4 * n_int + m_eta * nrho, dtype=dtype), n_int, m_eta, nrho)

    def __add__(self, other: "StateVector") -> "StateVector":
        return StateVector.unpack(self.pack() + other.pack(), self.n_int, self.m_eta, self.nrho)

    def __mul__(self, scalar) -> "StateVector":
        return StateVector.unpack(scalar * self.pack(), self.n_int, self.m_eta, self.nrho)

    __rmul__ = __mul__
