"""Worst-case optimal designs for binary potential outcomes via a linear program.

The variables are the worst-case variance v and a probability p_u for each
of the 2^n assignments. For every (a, b) in {0,1}^n x {0,1}^n the variance of
the network estimator is linear in p, so min_p max_{a,b} Var is an LP.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import TooLarge
from .estimation import PotentialOutcomes
from .interference import DesignMoments, GraphModel, exact_network_variance, k_tensor
from .lp import FEAS_TOL, LinearProgram, LpSolution, simplex

ENUM_MAX_N = 12
LP_MAX_N = 5
BRUTE_MAX_N = 3


def enumerate_assignments(n: int) -> np.ndarray:
    """The 2^n x n matrix W of all assignments, lexicographic with -1 before +1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > ENUM_MAX_N:
        raise TooLarge(f"enumeration limited to n <= {ENUM_MAX_N}, got {n}")
    return np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int8)


def outcome_pairs(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    cube = [np.array(v, dtype=float) for v in itertools.product((0, 1), repeat=n)]
    return [(a, b) for a in cube for b in cube]


@dataclass(frozen=True)
class DesignDistribution:
    w: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.w.shape[0],):
            raise ValueError(f"need {self.w.shape[0]} probabilities, got {p.shape}")
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.w.shape[1]

    def violations(self) -> dict[str, float]:
        p = self.probs
        return {
            "simplex": abs(float(p.sum()) - 1.0),
            "range": float(max(np.max(-p), np.max(p - 1.0), 0.0)),
            "unbiased": float(np.max(np.abs(p @ self.w))),
        }

    def is_valid(self, tol: float = FEAS_TOL) -> bool:
        return all(v <= tol for v in self.violations().values())

    def moments(self) -> DesignMoments:
        return DesignMoments.from_distribution(self.w, self.probs)


def uniform_design(n: int) -> DesignDistribution:
    w = enumerate_assignments(n)
    return DesignDistribution(w, np.full(w.shape[0], 1.0 / w.shape[0]))


def variance_coefficients(
    w: np.ndarray, k: np.ndarray, a: np.ndarray, b: np.ndarray, printed: bool = False
) -> np.ndarray:
    """Var(tau_net) at the point mass on each assignment row of ``w``, for outcomes (a, b).

    With ``printed=True`` the triple product W_ui W_uj W_uk is replaced by
    W_ui W_uk W_uk, which collapses to W_ui.
    """
    n = w.shape[1]
    wf = w.astype(float)
    s = a + b
    sq_sum = a**2 + b**2
    sq_diff = a**2 - b**2
    base = (wf @ s) ** 2
    # sum_{ijk} K_ijk w_i w_k (a_j^2 + b_j^2)
    kj_s = np.einsum("ijk,j->ik", k, sq_sum)
    second = np.einsum("ui,ik,uk->u", wf, kj_s, wf)
    if printed:
        third = np.einsum("ijk,j,ui->u", k, sq_diff, wf)
    else:
        third = np.einsum("ijk,j,ui,uj,uk->u", k, sq_diff, wf, wf, wf)
    return (base + 2.0 * (second + third)) / n**2


@dataclass
class LpProblem:
    lp: LinearProgram
    w: np.ndarray
    pairs: list[tuple[np.ndarray, np.ndarray]]
    printed: bool = False

    @property
    def n(self) -> int:
        return self.w.shape[1]


def build_lp(model: GraphModel, n: int | None = None, *, printed: bool = False) -> LpProblem:
    """Min-max variance LP over designs on ``n`` units (defaults to the model size)."""
    n = model.n if n is None else n
    if n != model.n:
        raise ValueError(f"model has {model.n} units, asked for n={n}")
    if n > LP_MAX_N:
        raise TooLarge(f"LP limited to n <= {LP_MAX_N} (4^n constraints), got {n}")
    w = enumerate_assignments(n)
    m = w.shape[0]
    kv = k_tensor(model).values
    pairs = outcome_pairs(n)
    coefs = np.array([variance_coefficients(w, kv, a, b, printed) for a, b in pairs])

    c = np.zeros(m + 1)
    c[0] = 1.0
    a_ub = np.hstack([-np.ones((len(pairs), 1)), coefs])
    b_ub = np.zeros(len(pairs))
    a_eq = np.vstack([np.hstack([np.zeros((n, 1)), w.T.astype(float)]), np.r_[0.0, np.ones(m)]])
    b_eq = np.r_[np.zeros(n), 1.0]
    lower = np.r_[-np.inf, np.zeros(m)]
    upper = np.r_[np.inf, np.ones(m)]

    def tag(v):
        return "".join(str(int(x)) for x in v)

    lp = LinearProgram(
        c, a_ub, b_ub, a_eq, b_eq, lower, upper,
        ["v"] + [f"p_{u + 1}" for u in range(m)],
        [f"var_a{tag(a)}_b{tag(b)}" for a, b in pairs],
        [f"unbiased_{i + 1}" for i in range(n)] + ["simplex"],
    )
    return LpProblem(lp, w, pairs, printed)


@dataclass(frozen=True)
class LpResult:
    value: float
    design: DesignDistribution
    solution: LpSolution


def solve_lp(problem: LpProblem) -> LpResult:
    sol = simplex(problem.lp)
    probs = np.clip(sol.x[1:], 0.0, 1.0)
    return LpResult(float(sol.x[0]), DesignDistribution(problem.w, probs), sol)


def brute_force_worst_case(model: GraphModel, design: DesignDistribution) -> float:
    """Oracle for solve_lp: the design's worst case over all binary outcome pairs (n <= 3)."""
    if model.n > BRUTE_MAX_N:
        raise TooLarge(f"brute force limited to n <= {BRUTE_MAX_N}, got {model.n}")
    moments = design.moments()
    k = k_tensor(model)
    n = model.n
    worst = -np.inf
    for a, b in outcome_pairs(n):
        s = a + b
        v = float(s @ moments.second @ s) / n**2 + exact_network_variance(PotentialOutcomes(a, b), model, moments, k)
        worst = max(worst, v)
    return worst


def grid_oracle(model: GraphModel, points: int = 2001, refine: int = 200) -> tuple[float, DesignDistribution]:
    """min over feasible designs of the brute-force worst case, by search over the feasible set.

    The feasible designs for n <= 2 form a segment (or a single point), so a
    grid followed by ternary refinement of the convex objective is exact up
    to rounding.
    """
    if model.n > 2:
        raise TooLarge("grid oracle supports n <= 2")
    w = enumerate_assignments(model.n)
    m = w.shape[0]
    p0 = np.full(m, 1.0 / m)
    basis = null_space(np.vstack([w.T.astype(float), np.ones(m)]))

    def objective(p):
        return brute_force_worst_case(model, DesignDistribution(w, p))

    if basis.shape[1] == 0:
        return objective(p0), DesignDistribution(w, p0)
    if basis.shape[1] > 1:
        raise TooLarge("grid oracle expects a one-dimensional feasible set")
    d = basis[:, 0]
    # p0 + t d >= 0
    lo = max(-p0[i] / d[i] for i in range(m) if d[i] > 0)
    hi = min(-p0[i] / d[i] for i in range(m) if d[i] < 0)
    ts = np.linspace(lo, hi, points)
    vals = np.array([objective(np.clip(p0 + t * d, 0.0, None)) for t in ts])
    j = int(np.argmin(vals))
    a, b = ts[max(j - 1, 0)], ts[min(j + 1, points - 1)]
    for _ in range(refine):
        m1, m2 = a + (b - a) / 3, b - (b - a) / 3
        if objective(np.clip(p0 + m1 * d, 0, None)) <= objective(np.clip(p0 + m2 * d, 0, None)):
            b = m2
        else:
            a = m1
    t = 0.5 * (a + b)
    p = np.clip(p0 + t * d, 0.0, None)
    return objective(p), DesignDistribution(w, p)
