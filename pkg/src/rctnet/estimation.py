"""Average treatment effect, the Horvitz-Thompson estimator and the
interference-corrected network estimator, with their error decompositions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import LengthMismatch, SingularMatrix, SingularModel


@dataclass(frozen=True)
class PotentialOutcomes:
    """Outcomes under treatment (``a``) and control (``b``) for every unit."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = numerics.as_vector(self.a, "a")
        b = numerics.as_vector(self.b, "b")
        if a.shape != b.shape:
            raise LengthMismatch(f"len(a)={a.size} != len(b)={b.size}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def mu(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    @property
    def tau(self) -> float:
        return float(np.mean(self.a - self.b))


def _check_len(n: int, z, what: str = "assignment") -> np.ndarray:
    z = np.asarray(z)
    if z.shape[-1] != n:
        raise LengthMismatch(f"{what} has length {z.shape[-1]}, expected {n}")
    return z


def observe(po: PotentialOutcomes, z) -> np.ndarray:
    """Observed outcomes: ``a_i`` where ``z_i = +1``, ``b_i`` where ``z_i = -1``.

    ``z`` may be a single assignment or a stack of them (last axis = units).
    """
    z = _check_len(po.n, z)
    return np.where(z > 0, po.a, po.b)


def tau_true(po: PotentialOutcomes) -> float:
    return po.tau


def tau_ht(y, z) -> float | np.ndarray:
    """Horvitz-Thompson estimate (2/n) <z, y> for half-half designs."""
    y = np.asarray(y, dtype=float)
    z = _check_len(y.shape[-1], z)
    if y.shape != np.shape(z) and y.ndim == np.ndim(z):
        raise LengthMismatch(f"y shape {y.shape} != z shape {np.shape(z)}")
    n = y.shape[-1]
    return 2.0 / n * np.sum(z * y, axis=-1)


def _solve_model(a_exp, rhs) -> np.ndarray:
    a_exp = numerics.as_matrix(a_exp, "A")
    try:
        return numerics.solve(np.eye(a_exp.shape[0]) + a_exp, rhs)
    except SingularMatrix as exc:
        raise SingularModel(f"I + A is not invertible: {exc}") from exc


def tau_net(y_prime, z, a_exp) -> float | np.ndarray:
    """Network estimate (2/n) <z, (I + A)^{-1} y'>.

    ``y_prime`` and ``z`` may be stacks of replicates (rows); the linear
    system is factored once.
    """
    yp = np.asarray(y_prime, dtype=float)
    z = _check_len(yp.shape[-1], z)
    n = yp.shape[-1]
    if np.shape(a_exp) != (n, n):
        raise LengthMismatch(f"A has shape {np.shape(a_exp)}, expected {(n, n)}")
    corrected = _solve_model(a_exp, yp.T).T
    return 2.0 / n * np.sum(z * corrected, axis=-1)


def ht_error(po: PotentialOutcomes, z) -> float | np.ndarray:
    """tau_ht - tau, which equals (2/n) <z, mu>."""
    z = _check_len(po.n, z)
    return 2.0 / po.n * (np.asarray(z, dtype=float) @ po.mu)


def mismatch_matrix(a_exp, c) -> np.ndarray:
    """E = (I + A)^{-1} (I + C) - I."""
    c = numerics.as_matrix(c, "C")
    n = c.shape[0]
    return _solve_model(a_exp, np.eye(n) + c) - np.eye(n)


def net_error_terms(po: PotentialOutcomes, z, a_exp, c) -> tuple[float, float]:
    """Split tau_net - tau into <z, a + b>/n and 2 <z, E y>/n."""
    z = np.asarray(_check_len(po.n, z), dtype=float)
    e = mismatch_matrix(a_exp, c)
    y = observe(po, z)
    base = float(z @ (po.a + po.b)) / po.n
    network = 2.0 * float(z @ (e @ y)) / po.n
    return base, network
