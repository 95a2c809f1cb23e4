"""Joint Monte Carlo over assignments and interference realizations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import PotentialOutcomes, observe, tau_ht, tau_net
from .interference import GraphModel, model_inverse, sample_C
from .rng import map_chunks

ESTIMATORS = ("ht", "net")
_CHUNK_ENTRIES = 2_000_000


@dataclass(frozen=True)
class EstimatorRun:
    estimator: str
    tau: float
    values: np.ndarray

    @property
    def replicates(self) -> int:
        return self.values.size

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def variance(self) -> float:
        return float(self.values.var(ddof=1))

    @property
    def se(self) -> float:
        return math.sqrt(self.variance / self.replicates)

    @property
    def bias_z(self) -> float:
        se = self.se
        bias = self.mean - self.tau
        if se == 0.0:
            return 0.0 if abs(bias) <= 1e-12 * max(1.0, abs(self.tau)) else math.copysign(math.inf, bias)
        return bias / se


def chunk_for(n: int) -> int:
    """Replicates per chunk, sized so a chunk of C realizations stays small."""
    return int(max(1, min(20_000, _CHUNK_ENTRIES // max(1, n * n))))


def simulate(
    po: PotentialOutcomes,
    model: GraphModel | None,
    design,
    replicates: int,
    rng: np.random.Generator,
    estimator: str = "net",
    workers: int = 1,
) -> EstimatorRun:
    """Draw (z, C) pairs, form y' = (I + C) y, and evaluate the chosen estimator.

    Without a model the outcomes are interference-free. Both estimators
    consume the same random numbers, so for equal seeds they see the same
    draws.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    n = po.n
    a_exp = model.expected_adjacency if model is not None else np.zeros((n, n))
    if estimator == "net" and model is not None:
        model_inverse(model)  # fail fast with SingularModel

    def chunk(stream, size):
        z = design.sample(stream, size)
        y = observe(po, z).astype(float)
        if model is not None:
            c = sample_C(model, stream, size)
            y = y + np.einsum("rij,rj->ri", c, y)
        if estimator == "ht":
            return tau_ht(y, z)
        return tau_net(y, z, a_exp)

    vals = np.concatenate(map_chunks(chunk, rng, replicates, chunk=chunk_for(n), workers=workers))
    return EstimatorRun(estimator, po.tau, vals)

