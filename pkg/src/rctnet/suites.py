"""Bundled verification suites used by ``rctnet verify``."""

from __future__ import annotations

import math

import numpy as np

from . import interference as net
from .designs import GramSchmidtWalk, GswConfig, IidDesign, RandomAllocation
from .estimation import PotentialOutcomes
from .report import Summary
from .simulation import simulate
from .verification import (
    Verdict,
    eigenvalue_sum_check,
    estimate_cov,
    gswd_cov_verdicts,
    gswd_variance_bound_check,
    iid_equivalence_check,
    ridge_identity_check,
    worst_case_variance_stat,
)
from .worstcase import enumerate_assignments

NETWORK_MAX_N = 4
EXACT_TOL = 1e-10
K_TOL = 1e-12
ZERO_TOL = 1e-14


def spectral_suite(n: int, d: int, phi: float, replicates: int, rng, workers: int = 1):
    streams = rng.spawn(3)
    x = streams[0].standard_normal((n, d))
    designs = [("iid", IidDesign(n))]
    if n % 2 == 0:
        designs.append(("allocation", RandomAllocation(n)))
    designs.append((f"gsw(phi={phi:g})", GramSchmidtWalk(GswConfig(phi, x))))
    verdicts, summaries = [], []
    for (name, design), stream in zip(designs, streams[1].spawn(len(designs))):
        cov = estimate_cov(design, n, replicates, stream, workers)
        v = eigenvalue_sum_check(cov)
        verdicts.append(Verdict(f"{v.name} [{name}]", v.statistic, v.threshold, v.detail, v.values))
        wc = worst_case_variance_stat(cov)
        summaries.append(Summary(f"worst-case variance factor [{name}]", wc, 0.0, 0.0, replicates,
                                 {"lambda_max": wc * n**2 / 4.0}))
    return verdicts, summaries


def gswd_suite(n: int, d: int, phi: float, replicates: int, rng, workers: int = 1):
    streams = rng.spawn(6)
    x = streams[0].standard_normal((n, d))
    cfg = GswConfig(phi, x)
    verdicts = list(gswd_cov_verdicts(cfg, replicates, streams[1], workers))
    beta = streams[2].standard_normal(d)
    inside = x @ beta
    resid = streams[2].standard_normal(n)
    q, _ = np.linalg.qr(x)
    outside = resid - q @ (q.T @ resid)
    for label, mu, stream in (("mu in span(X)", inside, streams[3]), ("mu orthogonal to X", outside, streams[4])):
        v = gswd_variance_bound_check(cfg, mu, replicates, stream, workers)
        verdicts.append(Verdict(f"{v.name} [{label}]", v.statistic, v.threshold, v.detail, v.values))
    worst = max(
        (ridge_identity_check(r.standard_normal(n), r.standard_normal((n, d)), float(r.uniform(0.01, 0.99)))
         for r in streams[5].spawn(100)),
        key=lambda v: v.statistic / v.threshold,
    )
    verdicts.append(Verdict("ridge-identity [100 random instances, worst]", worst.statistic, worst.threshold, worst.detail))
    verdicts.append(iid_equivalence_check(x, replicates, streams[5], workers))
    return verdicts, []


def random_bernoulli(n: int, rng, scale: float = 0.5) -> net.GraphModel:
    """Dense Bernoulli model whose alpha keeps I + A diagonally dominant."""
    p = rng.uniform(0.1, 0.9, (n, n))
    np.fill_diagonal(p, 0.0)
    return net.GraphModel.bernoulli(p, scale / max(1, n - 1))


def two_component_model(n: int, rng) -> net.GraphModel:
    split = max(1, n // 2 + n % 2)
    p = np.zeros((n, n))
    for block in (range(split), range(split, n)):
        for i in block:
            for j in block:
                if i != j:
                    p[i, j] = rng.uniform(0.2, 0.8)
    return net.GraphModel.bernoulli(p, 0.5 / max(1, split))


def k_oracle_error(model: net.GraphModel) -> float:
    cs, probs = net.enumerate_realizations(model)
    inv = net.model_inverse(model)
    e = inv @ (np.eye(model.n) + cs) - np.eye(model.n)
    cov = np.einsum("c,cij,ckj->ijk", probs, e, e)
    return float(np.max(np.abs(cov - net.k_tensor(model).values)))


def network_suite(n: int, replicates: int, rng, workers: int = 1):
    if n > NETWORK_MAX_N:
        raise ValueError(f"network suite enumerates graph realizations; need n <= {NETWORK_MAX_N}")
    streams = rng.spawn(6)
    model = random_bernoulli(n, streams[0])
    po = PotentialOutcomes(streams[0].uniform(-1, 1, n), streams[0].uniform(-1, 1, n))
    w = enumerate_assignments(n)
    uniform = np.full(w.shape[0], 1.0 / w.shape[0])
    verdicts = []

    verdicts.append(Verdict("K-tensor oracle", k_oracle_error(model), K_TOL, "max |Cov(E_ij, E_kj) - K_ijk| by enumeration"))

    brute = net.enumerate_network_variance(po, model, w, uniform)
    closed = net.iid_network_variance(po, model)
    verdicts.append(Verdict("iid network variance closed form", abs(brute - closed), EXACT_TOL,
                            f"enumeration {brute:.12g}, closed form {closed:.12g}"))

    probs = streams[1].dirichlet(np.ones(w.shape[0]))
    brute = net.enumerate_network_variance(po, model, w, probs)
    general = net.exact_network_variance(po, model, net.DesignMoments.from_distribution(w, probs))
    verdicts.append(Verdict("network variance, arbitrary design", abs(brute - general), EXACT_TOL,
                            f"enumeration {brute:.12g}, formula {general:.12g}"))

    f = 1.5
    flat = PotentialOutcomes(np.full(n, math.sqrt(f)), np.full(n, math.sqrt(f)))
    exact = net.enumerate_net_variance(flat, model, w, uniform)
    bound = float(np.trace(net.m_matrix(model, f)))
    verdicts.append(Verdict("M bound tight at a=b=sqrt(f)", abs(exact - bound), EXACT_TOL,
                            f"Var {exact:.12g}, tr(M) {bound:.12g}"))

    run = simulate(po, model, IidDesign(n), replicates, streams[2], "net", workers)
    f_po = float(max(np.max(po.a**2), np.max(po.b**2)))
    t = 2.0 * math.sqrt(run.variance)
    tail = float(np.mean(np.abs(run.values - run.tau) >= t))
    cheb = net.chebyshev_bound(model, f_po, t)
    verdicts.append(Verdict("Chebyshev bound dominates tail", tail, cheb, f"tail {tail:.4g} at t={t:.4g}, bound {cheb:.4g}"))

    gsw = GramSchmidtWalk(GswConfig(0.5, streams[3].standard_normal((n, 2))))
    for label, design, stream in (("iid", IidDesign(n), streams[4]), ("gsw", gsw, streams[5])):
        r = simulate(po, model, design, replicates, stream, "net", workers)
        verdicts.append(Verdict(f"tau_net unbiased [{label}]", abs(r.bias_z), 3.0,
                                f"mean {r.mean:.6g}, tau {r.tau:.6g}, SE {r.se:.3g}"))

    comp_model = two_component_model(max(n, 3), streams[0])
    comp_po = PotentialOutcomes(streams[0].uniform(-1, 1, comp_model.n), streams[0].uniform(-1, 1, comp_model.n))
    moments = net.DesignMoments.iid(comp_model.n)
    parts = net.per_component_variance(comp_po, comp_model, moments)
    total = net.exact_network_variance(comp_po, comp_model, moments)
    verdicts.append(Verdict("per-component variance sums to total", abs(sum(parts) - total), EXACT_TOL,
                            f"{len(parts)} components, total {total:.12g}"))
    labels = net.components(comp_model).labels
    kv = net.k_tensor(comp_model).values
    same = (labels[:, None, None] == labels[None, :, None]) & (labels[None, :, None] == labels[None, None, :])
    cross = float(np.max(np.abs(kv[~same]), initial=0.0))
    verdicts.append(Verdict("K vanishes across components", cross, ZERO_TOL, "max |K_ijk| over mixed-component triples"))

    summaries = [Summary("tau_net [iid]", run.mean, run.variance, run.se, run.replicates,
                         {"tau": run.tau, "well_defined": str(net.check_well_defined(model))})]
    return verdicts, summaries


SUITES = ("spectral", "gswd", "network", "all")
