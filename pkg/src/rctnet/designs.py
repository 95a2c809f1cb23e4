"""Randomization schemes: i.i.d., random allocation, permuted blocks, and the
Gram-Schmidt Walk Design.

Every scheme exists twice: as a single-draw function (``iid_design`` ...) and
as a design object with ``sample(rng, size)`` returning an ``(size, n)`` int8
array, which is what the Monte-Carlo code uses. Assignments are plain numpy
vectors with entries in {-1, +1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy.special import ndtr

from . import _backend
from .errors import DegeneratePhi, DimensionMismatch, OddBlock, OddPopulation, TooSmallN
from .numerics import as_matrix, least_squares

INTEGRALITY_EPS = 1e-9
_DEGENERATE = 1e-12


def check_assignment(z) -> np.ndarray:
    a = np.asarray(z)
    if a.ndim != 1 or not np.all((a == 1) | (a == -1)):
        raise ValueError("assignment must be a vector with entries in {-1, +1}")
    return a.astype(np.int8)


def treatment_groups(z) -> tuple[np.ndarray, np.ndarray]:
    """Index sets (Z+, Z-) of an assignment."""
    a = check_assignment(z)
    return np.flatnonzero(a == 1), np.flatnonzero(a == -1)


class Design(Protocol):
    n: int

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray: ...


@dataclass(frozen=True)
class IidDesign:
    """Complete randomization: independent fair coins."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        heads = rng.random((size, self.n)) < 0.5
        return np.where(heads, 1, -1).astype(np.int8)


def _balanced_rows(rng: np.random.Generator, size: int, m: int) -> np.ndarray:
    base = np.repeat(np.array([1, -1], dtype=np.int8), m // 2)
    return rng.permuted(np.broadcast_to(base, (size, m)), axis=1)


@dataclass(frozen=True)
class RandomAllocation:
    """Exactly n/2 units treated, uniformly over all balanced assignments."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.n % 2:
            raise OddPopulation(f"random allocation needs even n, got {self.n}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return _balanced_rows(rng, size, self.n)


@dataclass(frozen=True)
class BlockSpec:
    """An ordered partition of ``range(n)`` into blocks."""

    blocks: tuple[tuple[int, ...], ...]

    def __init__(self, blocks: Sequence[Sequence[int]]):
        object.__setattr__(self, "blocks", tuple(tuple(int(i) for i in b) for b in blocks))
        seen = sorted(i for b in self.blocks for i in b)
        if seen != list(range(len(seen))):
            raise ValueError("blocks must partition 0..n-1 (disjoint and covering)")

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)


@dataclass(frozen=True)
class PermutedBlock:
    """Random allocation within each block, blocks independent."""

    spec: BlockSpec

    def __post_init__(self):
        for k, b in enumerate(self.spec.blocks):
            if len(b) % 2:
                raise OddBlock(k, len(b))

    @property
    def n(self) -> int:
        return self.spec.n

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, self.n), dtype=np.int8)
        for b in self.spec.blocks:
            if b:
                out[:, list(b)] = _balanced_rows(rng, size, len(b))
        return out


@dataclass(frozen=True)
class GswConfig:
    """Parameters of the Gram-Schmidt Walk Design.

    ``xi`` is derived: the largest row norm of the covariates. When the
    covariates are all zero the covariate block of B is taken as zero.
    """

    phi: float
    covariates: np.ndarray
    integrality_eps: float = INTEGRALITY_EPS
    xi: float = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.phi <= 1.0) or math.isnan(self.phi):
            raise DegeneratePhi(f"phi must be in (0,1], got {self.phi}")
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        x = as_matrix(x, "covariates")
        if x.shape[0] < 1:
            raise ValueError("need at least one unit")
        x = x.copy()
        x.flags.writeable = False
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "xi", float(np.max(np.linalg.norm(x, axis=1))) if x.shape[1] else 0.0)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    def scaled_covariates(self) -> np.ndarray:
        """Covariate rows divided by ``xi`` (zeros when ``xi == 0``)."""
        if self.xi == 0.0:
            return np.zeros_like(self.covariates)
        return self.covariates / self.xi

    def b_matrix(self) -> np.ndarray:
        """B = [sqrt(phi) I ; sqrt(1 - phi) X' / xi], shape (n + d, n)."""
        top = math.sqrt(self.phi) * np.eye(self.n)
        bottom = math.sqrt(1.0 - self.phi) * self.scaled_covariates().T
        return np.vstack([top, bottom])


@dataclass
class GswStep:
    pivot: int
    z_before: np.ndarray
    direction: np.ndarray
    delta_plus: float
    delta_minus: float
    delta: float


@dataclass
class GswTrace:
    steps: list[GswStep]

    @property
    def iterations(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class GramSchmidtWalk:
    """Batched GSWD sampler backed by the compiled or numpy kernel."""

    cfg: GswConfig
    backend: str | None = None

    @property
    def n(self) -> int:
        return self.cfg.n

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        uniforms = rng.random((size, 2 * self.n))
        return _backend.gsw_walk(
            self.cfg.scaled_covariates(), self.cfg.phi, self.cfg.integrality_eps, uniforms, self.backend
        )


def iid_design(n: int, rng: np.random.Generator) -> np.ndarray:
    return IidDesign(n).sample(rng, 1)[0]


def random_allocation(n: int, rng: np.random.Generator) -> np.ndarray:
    return RandomAllocation(n).sample(rng, 1)[0]


def permuted_block(spec: BlockSpec, rng: np.random.Generator) -> np.ndarray:
    return PermutedBlock(spec).sample(rng, 1)[0]


def imbalance_probability(n: int, t: float) -> float:
    """CLT approximation of Pr[max(|Z+|, |Z-|) / n > t] under complete randomization.

    Equals ``2 * Phi(2 (1/2 - t) sqrt(n))`` with Phi the standard normal CDF.
    """
    if n < 30:
        raise TooSmallN(f"normal approximation requires n >= 30, got {n}")
    if not (0.5 < t <= 1.0):
        raise ValueError(f"t must be in (1/2, 1], got {t}")
    return float(2.0 * ndtr(2.0 * (0.5 - t) * math.sqrt(n)))


def imbalance_curve(ns: Sequence[int], t: float) -> list[tuple[int, float]]:
    return [(int(n), imbalance_probability(int(n), t)) for n in ns]


def _pick(alive: np.ndarray, draw: float) -> int:
    idx = np.flatnonzero(alive)
    return int(idx[min(int(math.floor(draw * idx.size)), idx.size - 1)])


def gsw_design(
    cfg: GswConfig,
    rng: np.random.Generator | None = None,
    *,
    uniforms: np.ndarray | None = None,
    trace: bool = False,
):
    """Draw one assignment from the Gram-Schmidt Walk Design.

    This is the direct transcription of the walk: the step direction is the
    minimum-norm least-squares solution over the alive, non-pivot columns of
    B. It consumes randomness exactly like the batch kernels, so for equal
    ``uniforms`` all three produce the same assignment. With ``trace=True``
    returns ``(z, GswTrace)``.
    """
    n = cfg.n
    if uniforms is None:
        if rng is None:
            raise ValueError("need rng or uniforms")
        uniforms = rng.random(2 * n)
    uniforms = np.asarray(uniforms, dtype=float)
    if uniforms.shape != (2 * n,):
        raise DimensionMismatch(f"need {2 * n} uniforms, got shape {uniforms.shape}")

    bmat = cfg.b_matrix()
    eps = cfg.integrality_eps
    z = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    p = _pick(alive, uniforms[0])
    kdraw = 1
    steps: list[GswStep] = []

    for t in range(n):
        if not alive.any():
            break
        if not alive[p]:
            p = _pick(alive, uniforms[kdraw])
            kdraw += 1
        free = alive.copy()
        free[p] = False
        u = np.zeros(n)
        u[p] = 1.0
        if free.any():
            u[free] = least_squares(bmat[:, free], -bmat[:, p])

        moving = alive & (u != 0.0)
        au = np.abs(u[moving])
        zm = z[moving]
        toward = np.where(u[moving] > 0, 1.0 - zm, 1.0 + zm) / au
        away = np.where(u[moving] > 0, 1.0 + zm, 1.0 - zm) / au
        ids = np.flatnonzero(moving)
        i_plus, i_minus = ids[np.argmin(toward)], ids[np.argmin(away)]
        d_plus, d_minus = float(toward.min()), float(away.min())
        before = z.copy()

        if d_plus <= _DEGENERATE or d_minus <= _DEGENERATE:
            delta = 0.0
            if d_plus <= _DEGENERATE:
                z[i_plus] = np.sign(u[i_plus])
            if d_minus <= _DEGENERATE:
                z[i_minus] = -np.sign(u[i_minus])
        else:
            if uniforms[n + t] < d_minus / (d_plus + d_minus):
                delta, blk, face = d_plus, i_plus, np.sign(u[i_plus])
            else:
                delta, blk, face = -d_minus, i_minus, -np.sign(u[i_minus])
            z[alive] += delta * u[alive]
            z[blk] = face

        snap = alive & (np.abs(z) >= 1.0 - eps)
        z[snap] = np.sign(z[snap])
        alive &= ~snap
        if trace:
            steps.append(GswStep(p, before, u, d_plus, d_minus, delta))

    out = np.where(z > 0, 1, -1).astype(np.int8)
    return (out, GswTrace(steps)) if trace else out

