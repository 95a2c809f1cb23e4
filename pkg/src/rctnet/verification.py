"""Monte-Carlo checks of the design guarantees, each returning a Verdict.

The exact statements hold in expectation; here they are tested on
estimates, so thresholds carry a statistical slack that shrinks like
1/sqrt(replicates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import numerics
from .designs import GramSchmidtWalk, GswConfig
from .errors import DegeneratePhi, DimensionMismatch, SingularMatrix
from .rng import map_chunks

# Calibrated on the i.i.d. design, where Cov(z) = I is known: the observed
# |trace - n| and max |Cov - I| stay well inside these multiples of 1/sqrt(R).
EIG_SUM_C = 3.0
IID_ENTRY_C = 5.0
LOEWNER_SLACK = 0.02
LAMBDA_SLACK = 0.05
RIDGE_RTOL = 1e-8


@dataclass(frozen=True)
class CovEstimate:
    mean: np.ndarray
    cov: np.ndarray
    replicates: int

    def __post_init__(self):
        c = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "cov", 0.5 * (c + c.T))

    @property
    def n(self) -> int:
        return self.cov.shape[0]

    @property
    def se_scale(self) -> float:
        return 1.0 / math.sqrt(self.replicates)

    @classmethod
    def exact(cls, cov) -> "CovEstimate":
        """Wrap an analytic covariance (treated as infinitely many replicates)."""
        cov = np.asarray(cov, dtype=float)
        return cls(np.zeros(cov.shape[0]), cov, 2**62)


@dataclass(frozen=True)
class Verdict:
    name: str
    statistic: float
    threshold: float
    detail: str = ""
    values: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.statistic <= self.threshold)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "statistic": float(self.statistic),
            "threshold": float(self.threshold),
            "detail": self.detail,
            "values": {k: _plain(v) for k, v in self.values.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Verdict":
        return cls(doc["name"], doc["statistic"], doc["threshold"], doc.get("detail", ""), doc.get("values", {}))


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def estimate_cov(design, n: int, replicates: int, rng: np.random.Generator, workers: int = 1) -> CovEstimate:
    """Sample mean and (ddof=1) covariance of the assignment vector."""
    if replicates < 2:
        raise ValueError("need at least 2 replicates")

    def chunk(stream, size):
        z = np.asarray(design.sample(stream, size), dtype=float)
        if z.shape[1] != n:
            raise DimensionMismatch(f"design produced {z.shape[1]} units, expected {n}")
        return z.sum(axis=0), z.T @ z

    parts = map_chunks(chunk, rng, replicates, workers=workers)
    s = sum(p[0] for p in parts)
    ss = sum(p[1] for p in parts)
    mean = s / replicates
    cov = (ss - replicates * np.outer(mean, mean)) / (replicates - 1)
    return CovEstimate(mean, cov, replicates)


def worst_case_variance_stat(cov: CovEstimate) -> float:
    """max over mu of Var(tau_ht) / |mu|^2, i.e. (4/n^2) lambda_max(Cov z)."""
    return 4.0 / cov.n**2 * numerics.lambda_max(cov.cov)


def eigenvalue_sum_check(cov: CovEstimate, tol: float | None = None) -> Verdict:
    """The eigenvalues of Cov(z) sum to n for any +-1 design."""
    n = cov.n
    if tol is None:
        tol = EIG_SUM_C * n * cov.se_scale
    total = float(np.sum(numerics.sym_eigen(cov.cov)[0]))
    return Verdict(
        "eigenvalue-sum",
        abs(total - n),
        tol,
        f"sum of eigenvalues {total:.6g} vs n={n}",
        {"eigenvalue_sum": total, "n": n},
    )


def loewner_check(
    lhs,
    rhs,
    probes: int = 100,
    slack: float = 0.0,
    rng: np.random.Generator | None = None,
    name: str = "loewner",
) -> Verdict:
    """Test lhs <= rhs in Loewner order on random unit probes plus the worst eigenvector.

    The statistic is max_v v'(lhs - rhs)v over the probes; it passes when that
    does not exceed ``slack``.
    """
    lhs = numerics.as_matrix(lhs, "lhs")
    rhs = numerics.as_matrix(rhs, "rhs")
    if lhs.shape != rhs.shape or lhs.shape[0] != lhs.shape[1]:
        raise DimensionMismatch(f"need equal square matrices, got {lhs.shape} and {rhs.shape}")
    diff = lhs - rhs
    diff = 0.5 * (diff + diff.T)
    n = diff.shape[0]
    rng = rng if rng is not None else np.random.default_rng(0)
    v = rng.standard_normal((probes, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    _, vecs = numerics.sym_eigen(diff)
    v = np.vstack([v, vecs[:, 0]])
    quad = np.einsum("pi,ij,pj->p", v, diff, v)
    stat = float(quad.max())
    return Verdict(name, stat, slack, f"max v'(lhs-rhs)v = {stat:.3e} over {len(v)} probes")


def projection_matrix(b) -> np.ndarray:
    """P = B (B'B)^{-1} B'; falls back to the pseudo-inverse when B is rank deficient."""
    b = numerics.as_matrix(b, "B")
    try:
        p = b @ numerics.solve(b.T @ b, b.T)
    except SingularMatrix:
        p = b @ np.linalg.pinv(b)
    return 0.5 * (p + p.T)


def projection_rank_note(b) -> str:
    rank = int(np.linalg.matrix_rank(b))
    cols = np.shape(b)[1]
    return "" if rank == cols else f"B rank deficient ({rank} < {cols}); pseudo-inverse used"


def _xi(x: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(x, axis=1))) if x.size else 0.0


def q_matrix(x, phi: float) -> np.ndarray:
    """Q = (phi I + (1 - phi) xi^{-2} X X')^{-1}."""
    if not 0.0 < phi <= 1.0:
        raise DegeneratePhi(f"phi must be in (0,1], got {phi}")
    x = np.atleast_2d(np.asarray(x, dtype=float).T).T
    n = x.shape[0]
    xi = _xi(x)
    if xi == 0.0:
        return np.eye(n) / phi
    return numerics.inverse(phi * np.eye(n) + (1.0 - phi) / xi**2 * (x @ x.T))


def ridge_loss(mu, x, phi: float) -> tuple[float, np.ndarray]:
    """min_beta (1/phi)|mu - X beta|^2 + (xi^2/(1-phi))|beta|^2 and its minimizer."""
    if not 0.0 < phi < 1.0:
        raise DegeneratePhi(f"phi must be strictly inside (0,1), got {phi}")
    mu = numerics.as_vector(mu, "mu")
    x = np.atleast_2d(np.asarray(x, dtype=float).T).T
    xi = _xi(x)
    if xi == 0.0:
        raise ValueError("ridge identity needs nonzero covariates")
    d = x.shape[1]
    lam = xi**2 / (1.0 - phi)
    beta = numerics.solve(x.T @ x / phi + lam * np.eye(d), x.T @ mu / phi)
    resid = mu - x @ beta
    return float(resid @ resid / phi + lam * beta @ beta), beta


def ridge_identity_check(mu, x, phi: float) -> Verdict:
    """mu' Q mu equals the optimal ridge loss."""
    if not 0.0 < phi < 1.0:
        raise DegeneratePhi(f"phi must be strictly inside (0,1), got {phi}")
    mu = numerics.as_vector(mu, "mu")
    lhs = float(mu @ q_matrix(x, phi) @ mu)
    rhs, _ = ridge_loss(mu, x, phi)
    return Verdict(
        "ridge-identity",
        abs(lhs - rhs),
        RIDGE_RTOL * max(1.0, abs(lhs)),
        f"mu'Q mu = {lhs:.12g}, ridge loss = {rhs:.12g}",
        {"lhs": lhs, "rhs": rhs},
    )


@dataclass(frozen=True)
class VarianceEstimate:
    mean: float
    variance: float
    se: float
    replicates: int


def error_variance(design, mu, replicates: int, rng: np.random.Generator, workers: int = 1) -> VarianceEstimate:
    """Monte-Carlo variance of (2/n)<z, mu>, with the standard error of that variance."""
    mu = numerics.as_vector(mu, "mu")
    n = mu.size
    chunks = map_chunks(lambda s, m: 2.0 / n * (design.sample(s, m).astype(float) @ mu), rng, replicates, workers=workers)
    e = np.concatenate(chunks)
    mean = float(e.mean())
    var = float(e.var(ddof=1))
    m4 = float(np.mean((e - mean) ** 4))
    se = math.sqrt(max(m4 - var**2, 0.0) / replicates)
    return VarianceEstimate(mean, var, se, replicates)


def gswd_variance_bound_check(
    cfg: GswConfig,
    mu,
    replicates: int,
    rng: np.random.Generator,
    workers: int = 1,
    backend: str | None = None,
) -> Verdict:
    """Var((2/n)<z,mu>) under the GSWD against the ridge-loss and 1/phi bounds."""
    mu = numerics.as_vector(mu, "mu")
    n = cfg.n
    if mu.size != n:
        raise DimensionMismatch(f"mu has length {mu.size}, expected {n}")
    est = error_variance(GramSchmidtWalk(cfg, backend), mu, replicates, rng, workers)
    spectral = 4.0 / (cfg.phi * n**2) * float(mu @ mu)
    if cfg.phi < 1.0 and cfg.xi > 0.0:
        ridge = 4.0 / n**2 * ridge_loss(mu, cfg.covariates, cfg.phi)[0]
    else:
        ridge = spectral
    bound = min(ridge, spectral)
    return Verdict(
        "gswd-variance-bound",
        est.variance,
        bound + 3.0 * est.se,
        f"Var = {est.variance:.6g} (SE {est.se:.2g}); ridge bound {ridge:.6g}, 1/phi bound {spectral:.6g}",
        {"variance": est.variance, "se": est.se, "ridge_bound": ridge, "spectral_bound": spectral},
    )


def gswd_cov_verdicts(
    cfg: GswConfig,
    replicates: int,
    rng: np.random.Generator,
    workers: int = 1,
    backend: str | None = None,
    slack: float = LOEWNER_SLACK,
    lambda_slack: float = LAMBDA_SLACK,
) -> list[Verdict]:
    """Cov(Bz) <= P, its top-left block phi Cov(z) <= phi Q, and lambda_max(Cov z) <= 1/phi."""
    cov = estimate_cov(GramSchmidtWalk(cfg, backend), cfg.n, replicates, rng, workers)
    b = cfg.b_matrix()
    cov_bz = b @ cov.cov @ b.T
    p = projection_matrix(b)
    probe_rng = np.random.default_rng(cfg.n * 1000 + cfg.d)
    tag = f"n={cfg.n},d={cfg.d},phi={cfg.phi:g}"
    full = loewner_check(cov_bz, p, slack=slack, rng=probe_rng, name=f"cov(Bz)<=P [{tag}]")
    block = loewner_check(
        cfg.phi * cov.cov, cfg.phi * q_matrix(cfg.covariates, cfg.phi), slack=slack, rng=probe_rng,
        name=f"phi cov(z)<=phi Q [{tag}]",
    )
    lam = numerics.lambda_max(cov.cov)
    lam_v = Verdict(
        f"lambda_max<=1/phi [{tag}]", lam, 1.0 / cfg.phi + lambda_slack, f"lambda_max = {lam:.6g}", {"lambda_max": lam}
    )
    return [full, block, lam_v]


def iid_equivalence_check(
    x, replicates: int, rng: np.random.Generator, workers: int = 1
) -> Verdict:
    """At phi = 1 the GSWD ignores the covariates and is the i.i.d. design: Cov(z) = I."""
    cfg = GswConfig(1.0, x)
    n = cfg.n
    cov = estimate_cov(GramSchmidtWalk(cfg), n, replicates, rng, workers)
    dev = float(np.max(np.abs(cov.cov - np.eye(n))))
    return Verdict(
        "phi=1 equals iid",
        dev,
        IID_ENTRY_C * cov.se_scale,
        f"max |cov(z) - I| = {dev:.3e}",
    )
