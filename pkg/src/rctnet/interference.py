"""Probabilistic network interference: y' = (I + C) y with E[C] = A.

Covers the edge-weight models, sampling, well-definedness of the network
estimator, the K tensor, the M bound matrix, exact variance formulas and the
per-component decomposition.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from . import numerics
from .errors import LengthMismatch, ModelValidationError, SingularMatrix, SingularModel, TooLarge
from .estimation import PotentialOutcomes, observe
from .rng import map_chunks

K_TENSOR_MAX_N = 200
COND_LIMIT = 1e10
DEFAULT_MOMENT_REPLICATES = 100_000
_ENUM_MAX_EDGES = 16

KINDS = ("deterministic", "bernoulli", "uniform_activation")


def _param_matrix(value, n: int, name: str, lo: float, hi: float | None) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.shape != (n, n):
        raise ModelValidationError(f"{name} must be {n}x{n}, got shape {m.shape}")
    for i, j in itertools.product(range(n), range(n)):
        v = m[i, j]
        where = f"{name}[{i}][{j}]"
        if not math.isfinite(v):
            raise ModelValidationError(f"{where} is not finite")
        if i == j and v != 0.0:
            raise ModelValidationError(f"{where} = {v}: diagonal entries must be 0")
        if v < lo or (hi is not None and v > hi):
            rng = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
            raise ModelValidationError(f"{where} = {v} outside {rng}")
    m = m.copy()
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class GraphModel:
    """Distribution of the interference matrix C.

    ``deterministic``: C = A. ``bernoulli``: C_ij = alpha with probability
    p_ij, else 0. ``uniform_activation``: with probability p_ij the edge is
    active and C_ij ~ U[0, alpha_ij], else 0. Edges are independent.
    """

    kind: str
    n: int
    a: np.ndarray | None = None
    p: np.ndarray | None = None
    alpha: Any = None
    expected_adjacency: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        n = int(self.n)
        if n < 1:
            raise ModelValidationError(f"n must be >= 1, got {self.n}")
        object.__setattr__(self, "n", n)
        if self.kind == "deterministic":
            if self.a is None:
                raise ModelValidationError("deterministic model needs A")
            a = _param_matrix(self.a, n, "A", 0.0, None)
            object.__setattr__(self, "a", a)
            exp = a
        else:
            if self.p is None or self.alpha is None:
                raise ModelValidationError(f"{self.kind} model needs p and alpha")
            p = _param_matrix(self.p, n, "p", 0.0, 1.0)
            object.__setattr__(self, "p", p)
            if self.kind == "bernoulli":
                alpha = float(self.alpha)
                if not math.isfinite(alpha) or alpha < 0:
                    raise ModelValidationError(f"alpha = {self.alpha} must be finite and >= 0")
                object.__setattr__(self, "alpha", alpha)
                exp = p * alpha
            else:
                if np.ndim(self.alpha) == 0:
                    alpha = np.full((n, n), float(self.alpha))
                    np.fill_diagonal(alpha, 0.0)
                else:
                    alpha = self.alpha
                alpha = _param_matrix(alpha, n, "alpha", 0.0, None)
                object.__setattr__(self, "alpha", alpha)
                exp = p * alpha / 2.0
        exp = np.array(exp, dtype=float)
        exp.flags.writeable = False
        object.__setattr__(self, "expected_adjacency", exp)

    @classmethod
    def deterministic(cls, a) -> "GraphModel":
        a = np.asarray(a, dtype=float)
        return cls("deterministic", a.shape[0], a=a)

    @classmethod
    def bernoulli(cls, p, alpha: float) -> "GraphModel":
        p = np.asarray(p, dtype=float)
        return cls("bernoulli", p.shape[0], p=p, alpha=alpha)

    @classmethod
    def uniform_activation(cls, p, alpha) -> "GraphModel":
        p = np.asarray(p, dtype=float)
        return cls("uniform_activation", p.shape[0], p=p, alpha=alpha)

    @classmethod
    def from_dict(cls, doc: dict) -> "GraphModel":
        if not isinstance(doc, dict):
            raise ModelValidationError("graph model must be a JSON object")
        for key in ("n", "kind"):
            if key not in doc:
                raise ModelValidationError(f"missing field {key!r}")
        n, kind = doc["n"], doc["kind"]
        if not isinstance(n, int) or isinstance(n, bool):
            raise ModelValidationError(f"n must be an integer, got {n!r}")
        try:
            if kind == "deterministic":
                return cls(kind, n, a=doc.get("A"))
            alpha = doc.get("alpha")
            return cls(kind, n, p=doc.get("p"), alpha=alpha)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelValidationError):
                raise
            raise ModelValidationError(f"malformed graph model: {exc}") from exc

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {"n": self.n, "kind": self.kind}
        if self.kind == "deterministic":
            doc["A"] = self.a.tolist()
        else:
            doc["p"] = self.p.tolist()
            doc["alpha"] = self.alpha if self.kind == "bernoulli" else self.alpha.tolist()
        return doc


def load_graph(path: str | Path) -> GraphModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelValidationError(f"{path}: invalid JSON ({exc})") from exc
    return GraphModel.from_dict(doc)


def sample_C(model: GraphModel, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """One realization of C, or a stack of ``size`` realizations."""
    shape = (model.n, model.n) if size is None else (size, model.n, model.n)
    if model.kind == "deterministic":
        return np.broadcast_to(model.a, shape).copy()
    active = rng.random(shape) < model.p
    if model.kind == "bernoulli":
        return np.where(active, model.alpha, 0.0)
    weight = rng.random(shape) * model.alpha
    return np.where(active, weight, 0.0)


def edge_variance(model: GraphModel) -> np.ndarray:
    """Entrywise Var[C_ij]."""
    if model.kind == "deterministic":
        return np.zeros((model.n, model.n))
    p = model.p
    if model.kind == "bernoulli":
        return model.alpha**2 * p * (1.0 - p)
    alpha = model.alpha
    return p * alpha**2 / 3.0 - (p * alpha / 2.0) ** 2


def enumerate_realizations(model: GraphModel) -> tuple[np.ndarray, np.ndarray]:
    """All realizations of C with their probabilities (discrete models only)."""
    if model.kind == "deterministic":
        return model.a[None].copy(), np.ones(1)
    if model.kind != "bernoulli":
        raise ValueError("only deterministic and bernoulli models have finite support")
    p = model.p
    free = [(i, j) for i, j in zip(*np.nonzero((p > 0) & (p < 1)))]
    if len(free) > _ENUM_MAX_EDGES:
        raise TooLarge(f"{len(free)} random edges exceed the enumeration cap {_ENUM_MAX_EDGES}")
    base = np.where(p >= 1.0, model.alpha, 0.0)
    cs = np.repeat(base[None], 2 ** len(free), axis=0)
    probs = np.ones(2 ** len(free))
    for r, bits in enumerate(itertools.product((0, 1), repeat=len(free))):
        for (i, j), on in zip(free, bits):
            cs[r, i, j] = model.alpha if on else 0.0
            probs[r] *= p[i, j] if on else 1.0 - p[i, j]
    return cs, probs


class WellDefined(enum.Enum):
    GUARANTEED_BY_DOMINANCE = "GuaranteedByDominance"
    INVERTIBLE_NUMERICALLY = "InvertibleNumerically"
    SINGULAR = "Singular"

    def __str__(self) -> str:
        return self.value


def max_degree(model: GraphModel) -> int:
    support = model.a if model.kind == "deterministic" else model.p
    return int(np.max(np.count_nonzero(support > 0, axis=1)))


def check_well_defined(model: GraphModel) -> WellDefined:
    """Whether I + A is invertible, preferring the sufficient dominance conditions."""
    d_max = max_degree(model)
    if model.kind == "deterministic":
        dominated = float(np.max(model.a.sum(axis=1))) < 1.0
    elif d_max == 0:
        dominated = True
    elif model.kind == "bernoulli":
        dominated = model.alpha < 1.0 / d_max
    else:
        dominated = float(np.max(model.alpha)) < 2.0 / d_max
    if dominated:
        return WellDefined.GUARANTEED_BY_DOMINANCE
    m = np.eye(model.n) + model.expected_adjacency
    try:
        numerics.lu(m)
    except SingularMatrix:
        return WellDefined.SINGULAR
    return WellDefined.INVERTIBLE_NUMERICALLY if np.linalg.cond(m) < COND_LIMIT else WellDefined.SINGULAR


def model_inverse(model: GraphModel) -> np.ndarray:
    """(I + A)^{-1}; raises SingularModel."""
    try:
        return numerics.inverse(np.eye(model.n) + model.expected_adjacency)
    except SingularMatrix as exc:
        raise SingularModel(f"I + A is not invertible ({check_well_defined(model)})") from exc


def simulate_observed(po: PotentialOutcomes, z, model: GraphModel, rng: np.random.Generator) -> np.ndarray:
    """y' = (I + C) y for one fresh realization of C."""
    y = observe(po, z).astype(float)
    return y + sample_C(model, rng) @ y


@dataclass(frozen=True)
class KTensor:
    """K[i, j, k] = sum_u Inv[i,u] Inv[k,u] Var[C[u,j]]."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, idx):
        return self.values[idx]


def k_from(inv: np.ndarray, var: np.ndarray) -> np.ndarray:
    """Dense K tensor from (I + A)^{-1} and the edge variances."""
    # [i, j, u] = inv[i, u] * var[u, j], then contract u against inv[k, u]
    left = inv[:, None, :] * var.T[None, :, :]
    return left @ inv.T


def k_tensor(model: GraphModel, max_n: int = K_TENSOR_MAX_N) -> KTensor:
    if model.n > max_n:
        raise TooLarge(f"K tensor needs n^3 storage; n={model.n} exceeds the cap {max_n}")
    return KTensor(k_from(model_inverse(model), edge_variance(model)))


def column_cov_sum(model: GraphModel) -> np.ndarray:
    """sum_i Cov(e_i), i.e. the matrix S with S[j, k] = sum_i K[j, i, k]."""
    inv = model_inverse(model)
    w = edge_variance(model).sum(axis=1)
    return (inv * w) @ inv.T


def m_matrix(model: GraphModel, f: float) -> np.ndarray:
    """M = (4f/n^2)(11' + sum_i Cov(e_i))."""
    if f < 0 or not math.isfinite(f):
        raise ValueError(f"f must be finite and >= 0, got {f}")
    n = model.n
    m = 4.0 * f / n**2 * (np.ones((n, n)) + column_cov_sum(model))
    m = 0.5 * (m + m.T)
    assert numerics.sym_eigen(m)[0][-1] >= -1e-9 * max(1.0, float(np.abs(m).max())), "M must be PSD"
    return m


def r_matrix(model: GraphModel, f: float) -> np.ndarray:
    return numerics.psd_sqrt(m_matrix(model, f))


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    se: float
    replicates: int


def quadratic_form_mean(
    m: np.ndarray,
    design,
    replicates: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> MonteCarloEstimate:
    """Monte-Carlo estimate of E[z' M z] under ``design``."""
    if replicates < 2:
        raise ValueError("need at least 2 replicates")

    def chunk(stream, size):
        z = design.sample(stream, size).astype(float)
        q = np.einsum("ri,ij,rj->r", z, m, z)
        return q.sum(), (q * q).sum()

    parts = map_chunks(chunk, rng, replicates, workers=workers)
    s = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s / replicates
    var = max(s2 / replicates - mean * mean, 0.0) * replicates / (replicates - 1)
    return MonteCarloEstimate(float(mean), float(math.sqrt(var / replicates)), replicates)


def variance_bound(
    model: GraphModel,
    f: float,
    design,
    replicates: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> MonteCarloEstimate:
    """E_z[z' M z], the design-dependent upper bound on Var(tau_net)."""
    return quadratic_form_mean(m_matrix(model, f), design, replicates, rng, workers)


@dataclass(frozen=True)
class DesignMoments:
    """Second moments E[z_i z_k] and third moments E[z_i z_j z_k] of a design.

    For designs with E[z] = 0 the second moments are the covariances.
    """

    second: np.ndarray
    third: np.ndarray

    @property
    def n(self) -> int:
        return self.second.shape[0]

    @classmethod
    def iid(cls, n: int) -> "DesignMoments":
        return cls(np.eye(n), np.zeros((n, n, n)))

    @classmethod
    def from_distribution(cls, w, probs) -> "DesignMoments":
        w = np.asarray(w, dtype=float)
        probs = np.asarray(probs, dtype=float)
        second = (w * probs[:, None]).T @ w
        third = np.einsum("u,ui,uj,uk->ijk", probs, w, w, w)
        return cls(second, third)

    @classmethod
    def from_samples(cls, z) -> "DesignMoments":
        z = np.asarray(z, dtype=float)
        r, n = z.shape
        second = z.T @ z / r
        third = np.zeros((n, n, n))
        for lo in range(0, r, 20_000):
            blk = z[lo : lo + 20_000]
            pairs = (blk[:, :, None] * blk[:, None, :]).reshape(len(blk), n * n)
            third += (pairs.T @ blk).reshape(n, n, n)
        return cls(second, third / r)

    @classmethod
    def from_design(
        cls, design, rng: np.random.Generator, replicates: int = DEFAULT_MOMENT_REPLICATES
    ) -> "DesignMoments":
        return cls.from_samples(design.sample(rng, replicates))


def _network_terms(k: np.ndarray, po: PotentialOutcomes, moments: DesignMoments) -> np.ndarray:
    """Per-j contributions (before the 2/n^2 factor)."""
    s = po.a**2 + po.b**2
    d = po.a**2 - po.b**2
    cov_part = np.einsum("ijk,ik->j", k, moments.second) * s
    third_part = np.einsum("ijk,ijk->j", k, moments.third) * d
    return cov_part + third_part


def _check_n(po: PotentialOutcomes, model: GraphModel, moments: DesignMoments | None = None):
    if po.n != model.n or (moments is not None and moments.n != model.n):
        raise LengthMismatch("outcomes, model and design moments must share n")


def exact_network_variance(
    po: PotentialOutcomes, model: GraphModel, moments: DesignMoments, k: KTensor | None = None
) -> float:
    """(4/n^2) E[(z' E y)^2], the network part of Var(tau_net)."""
    _check_n(po, model, moments)
    kv = (k or k_tensor(model)).values
    return float(2.0 / model.n**2 * _network_terms(kv, po, moments).sum())


def iid_network_variance(
    po: PotentialOutcomes, model: GraphModel, k: KTensor | None = None, *, printed: bool = False
) -> float:
    """Closed form of the network variance part under the i.i.d. design.

    All third moments of the i.i.d. design vanish, leaving
    (2/n^2) sum_{i,j} K[i,j,i] (a_j^2 + b_j^2). ``printed=True`` evaluates the
    alternative expression
    (2/n^2)(sum_{i,j} K[i,j,i](a_j^2 - b_j^2) - sum_i K[i,i,i](a_i^2 + b_i^2)),
    which assumes E[z_i^3] = -1 and does not match enumeration.
    """
    _check_n(po, model)
    kv = (k or k_tensor(model)).values
    diag = np.einsum("iji->j", kv)
    sq_sum = po.a**2 + po.b**2
    if printed:
        total = diag @ (po.a**2 - po.b**2) - np.einsum("iii->i", kv) @ sq_sum
    else:
        total = diag @ sq_sum
    return float(2.0 / model.n**2 * total)


def exact_variance(po: PotentialOutcomes, model: GraphModel, moments: DesignMoments) -> float:
    """Var(tau_net) = (1/n^2)[(a+b)' Cov(z) (a+b) + 4 E(z' E y)^2]."""
    _check_n(po, model, moments)
    s = po.a + po.b
    return float(s @ moments.second @ s / model.n**2) + exact_network_variance(po, model, moments)


def chebyshev_bound(model: GraphModel, f: float, t: float) -> float:
    """Pr[|tau_net - tau| >= t] <= tr(M) / t^2 under the i.i.d. design, capped at 1."""
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    if math.isinf(t):
        return 0.0
    inv = model_inverse(model)
    var = edge_variance(model)
    n = model.n
    spill = float(np.sum(inv**2 @ var)) / n
    return min(1.0, 4.0 * f / n * (1.0 + spill) / t**2)


@dataclass(frozen=True)
class Components:
    labels: np.ndarray
    sets: tuple[tuple[int, ...], ...]

    @property
    def count(self) -> int:
        return len(self.sets)


def components(model: GraphModel) -> Components:
    """Connected components of the support graph {A_ij > 0 or A_ji > 0}."""
    support = csr_matrix(model.expected_adjacency > 0)
    count, labels = csgraph.connected_components(support, directed=True, connection="weak")
    # relabel in order of first appearance so ids are stable
    order = {}
    for lab in labels:
        order.setdefault(int(lab), len(order))
    labels = np.array([order[int(lab)] for lab in labels])
    sets = tuple(tuple(int(i) for i in np.flatnonzero(labels == c)) for c in range(count))
    return Components(labels, sets)


def per_component_variance(
    po: PotentialOutcomes, model: GraphModel, moments: DesignMoments, k: KTensor | None = None
) -> list[float]:
    """Network variance split over connected components; the entries sum to the total."""
    _check_n(po, model, moments)
    kv = (k or k_tensor(model)).values
    out = []
    for comp in components(model).sets:
        s = np.array(comp)
        sub = PotentialOutcomes(po.a[s], po.b[s])
        sub_m = DesignMoments(moments.second[np.ix_(s, s)], moments.third[np.ix_(s, s, s)])
        kk = kv[np.ix_(s, s, s)]
        out.append(float(2.0 / model.n**2 * _network_terms(kk, sub, sub_m).sum()))
    return out


def mismatch_samples(model: GraphModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Realizations of E = (I + A)^{-1}(I + C) - I, shape (size, n, n)."""
    inv = model_inverse(model)
    cs = sample_C(model, rng, size)
    return (inv @ (np.eye(model.n) + cs)) - np.eye(model.n)


def enumerate_network_variance(
    po: PotentialOutcomes,
    model: GraphModel,
    w: np.ndarray,
    probs: np.ndarray,
) -> float:
    """(4/n^2) E[(z' E y)^2] by exhaustive enumeration over C and a discrete design."""
    cs, cprob = enumerate_realizations(model)
    inv = model_inverse(model)
    n = model.n
    es = inv @ (np.eye(n) + cs) - np.eye(n)
    ys = observe(po, w).astype(float)
    # val[c, u] = z_u' E_c y_u
    val = np.einsum("ui,cij,uj->cu", w.astype(float), es, ys)
    return float(4.0 / n**2 * np.einsum("c,u,cu->", cprob, probs, val**2))


def enumerate_net_variance(
    po: PotentialOutcomes, model: GraphModel, w: np.ndarray, probs: np.ndarray
) -> float:
    """Var(tau_net) by exhaustive enumeration over C and a discrete design."""
    cs, cprob = enumerate_realizations(model)
    inv = model_inverse(model)
    n = model.n
    ys = observe(po, w).astype(float)
    yp = ys[None] + np.einsum("cij,uj->cui", cs, ys)
    est = 2.0 / n * np.einsum("ui,cui->cu", w.astype(float), yp @ inv.T)
    weights = cprob[:, None] * probs[None, :]
    mean = float(np.sum(weights * est))
    return float(np.sum(weights * (est - mean) ** 2))

