"""Acceptance criteria 1-13, each printed as one PASS/FAIL line.

Run with pytest, or directly: ``python tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest

from rctnet import interference as net
from rctnet.designs import (
    BlockSpec,
    GramSchmidtWalk,
    GswConfig,
    IidDesign,
    PermutedBlock,
    RandomAllocation,
    imbalance_probability,
)
from rctnet.estimation import PotentialOutcomes, observe, tau_ht
from rctnet.simulation import simulate
from rctnet.suites import k_oracle_error, random_bernoulli, two_component_model
from rctnet.verification import gswd_cov_verdicts, gswd_variance_bound_check, ridge_identity_check
from rctnet.worstcase import build_lp, enumerate_assignments, grid_oracle, solve_lp

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

SEED = 20240611


def record(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2}: {title} :: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def info(num: int, text: str) -> None:
    line = f"[INFO] criterion {num:>2}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_01_imbalance():
    val = imbalance_probability(200, 0.6)
    indep = math.erfc(2.0 * math.sqrt(2.0) / math.sqrt(2.0))  # 2 Phi(-2 sqrt 2)
    best = math.inf
    for _ in range(200):
        t0 = time.perf_counter()
        imbalance_probability(200, 0.6)
        best = min(best, time.perf_counter() - t0)
    ok = val < 0.0047 and abs(val - indep) <= 1e-4 and best < 1e-3
    record(1, "imbalance probability n=200, t=0.6", ok,
           f"value {val:.6g} (< 0.0047), independent {indep:.6g}, {best * 1e6:.1f} us/call")


def test_criterion_02_ht_unbiased():
    rng = np.random.default_rng(SEED + 2)
    n, d, reps = 8, 2, 100_000
    po = PotentialOutcomes(rng.uniform(-5, 5, n), rng.uniform(-5, 5, n))
    x = rng.standard_normal((n, d))
    designs = [("iid", IidDesign(n)), ("allocation", RandomAllocation(n)),
               ("block", PermutedBlock(BlockSpec([[0, 1, 2, 3], [4, 5, 6, 7]])))]
    designs += [(f"gsw phi={phi}", GramSchmidtWalk(GswConfig(phi, x))) for phi in (0.2, 0.5, 1.0)]
    t0 = time.perf_counter()
    worst, parts = 0.0, []
    for (name, design), stream in zip(designs, rng.spawn(len(designs))):
        run = simulate(po, None, design, reps, stream, "ht")
        worst = max(worst, abs(run.bias_z))
        parts.append(f"{name} {run.bias_z:+.2f}")
    elapsed = time.perf_counter() - t0
    record(2, "HT unbiased across designs", worst <= 3.0 and elapsed < 60,
           f"bias/SE {', '.join(parts)}; {elapsed:.1f} s")


GRID = [(6, 2, 0.5), (8, 3, 0.2)]
_COV_CACHE: dict = {}


def _cov_verdicts():
    if not _COV_CACHE:
        t0 = time.perf_counter()
        rng = np.random.default_rng(SEED + 3)
        for (n, d, phi), stream in zip(GRID, rng.spawn(len(GRID))):
            cfg = GswConfig(phi, stream.standard_normal((n, d)))
            _COV_CACHE[(n, d, phi)] = gswd_cov_verdicts(cfg, 200_000, stream)
        _COV_CACHE["elapsed"] = time.perf_counter() - t0
    return _COV_CACHE


def test_criterion_03_loewner():
    cache = _cov_verdicts()
    rows = [cache[g][0] for g in GRID]
    ok = all(v.passed and v.threshold == 0.02 for v in rows) and cache["elapsed"] < 300
    record(3, "Cov(Bz) <= P in Loewner order", ok,
           "; ".join(f"{g}: max v'(C-P)v = {v.statistic:.4f}" for g, v in zip(GRID, rows))
           + f"; {cache['elapsed']:.1f} s")


def test_criterion_04_lambda_max():
    cache = _cov_verdicts()
    rows = [cache[g][2] for g in GRID]
    ok = all(v.statistic <= 1.0 / g[2] + 0.05 for g, v in zip(GRID, rows))
    record(4, "lambda_max(Cov z) <= 1/phi + 0.05", ok,
           "; ".join(f"{g}: {v.statistic:.4f} <= {1 / g[2] + 0.05:.4f}" for g, v in zip(GRID, rows)))


def test_criterion_05_ridge():
    rng = np.random.default_rng(SEED + 5)
    t0 = time.perf_counter()
    worst = 0.0
    for r in rng.spawn(100):
        n = int(r.integers(2, 12))
        d = int(r.integers(1, 5))
        v = ridge_identity_check(r.standard_normal(n), r.standard_normal((n, d)), float(r.uniform(0.01, 0.99)))
        worst = max(worst, v.statistic / max(1.0, abs(v.values["lhs"])))
    elapsed = time.perf_counter() - t0
    record(5, "mu'Q mu equals the optimal ridge loss", worst <= 1e-8 and elapsed < 1,
           f"worst relative discrepancy {worst:.2e} over 100 instances; {elapsed * 1e3:.0f} ms")


def test_criterion_06_ridge_bound():
    rng = np.random.default_rng(SEED + 6)
    n, d = 8, 2
    x = rng.standard_normal((n, d))
    q, _ = np.linalg.qr(x)
    inside = x @ rng.standard_normal(d)
    resid = rng.standard_normal(n)
    outside = resid - q @ (q.T @ resid)
    ok, parts = True, []
    for phi in (0.2, 0.5):
        cfg = GswConfig(phi, x)
        for label, mu in (("in span", inside), ("orthogonal", outside)):
            v = gswd_variance_bound_check(cfg, mu, 200_000, rng)
            limit = v.values["ridge_bound"] + 3.0 * v.values["se"]
            ok &= v.statistic <= limit
            parts.append(f"phi={phi} {label}: {v.statistic:.4g} <= {limit:.4g}")
    record(6, "GSWD variance under ridge-loss bound", ok, "; ".join(parts))


def test_criterion_07_k_oracle():
    rng = np.random.default_rng(SEED + 7)
    model = random_bernoulli(3, rng)
    t0 = time.perf_counter()
    cs, _ = net.enumerate_realizations(model)
    err = k_oracle_error(model)
    elapsed = time.perf_counter() - t0
    ok = cs.shape[0] == 64 and err <= 1e-12 and elapsed < 1
    record(7, "K tensor equals enumerated Cov(E_ij, E_kj)", ok,
           f"{cs.shape[0]} realizations, 27 triples, max error {err:.2e}; {elapsed * 1e3:.0f} ms")


def test_criterion_08_iid_closed_form():
    rng = np.random.default_rng(SEED + 8)
    w = enumerate_assignments(3)
    uniform = np.full(8, 1 / 8)
    t0 = time.perf_counter()
    worst = worst_printed = 0.0
    for r in rng.spawn(20):
        model = random_bernoulli(3, r)
        po = PotentialOutcomes(r.uniform(-1, 1, 3), r.uniform(-1, 1, 3))
        brute = net.enumerate_network_variance(po, model, w, uniform)
        worst = max(worst, abs(brute - net.iid_network_variance(po, model)))
        worst_printed = max(worst_printed, abs(brute - net.iid_network_variance(po, model, printed=True)))
    elapsed = time.perf_counter() - t0
    info(8, f"alternative closed form with E[z_i^3] = -1 deviates by up to {worst_printed:.3e}")
    record(8, "iid network variance closed form vs brute force", worst <= 1e-10 and elapsed < 10,
           f"max |brute - closed| {worst:.2e} over 20 instances (8 x 64 each); {elapsed:.2f} s")


def test_criterion_09_net_unbiased():
    rng = np.random.default_rng(SEED + 9)
    n = 5
    model = random_bernoulli(n, rng)
    po = PotentialOutcomes(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n))
    gsw = GramSchmidtWalk(GswConfig(0.5, rng.standard_normal((n, 2))))
    parts, worst = [], 0.0
    for (name, design), stream in zip((("iid", IidDesign(n)), ("gsw", gsw)), rng.spawn(2)):
        run = simulate(po, model, design, 100_000, stream, "net")
        worst = max(worst, abs(run.bias_z))
        parts.append(f"{name}: mean {run.mean:.5f}, tau {run.tau:.5f}, bias/SE {run.bias_z:+.2f}")
    record(9, "tau_net unbiased, Bernoulli n=5", worst <= 3.0, "; ".join(parts))


def test_criterion_10_tightness_chebyshev():
    rng = np.random.default_rng(SEED + 10)
    w = enumerate_assignments(3)
    uniform = np.full(8, 1 / 8)
    f = 1.7
    flat = PotentialOutcomes(np.full(3, math.sqrt(f)), np.full(3, math.sqrt(f)))
    worst = 0.0
    for r in rng.spawn(10):
        model = random_bernoulli(3, r)
        worst = max(worst, abs(net.enumerate_net_variance(flat, model, w, uniform) - np.trace(net.m_matrix(model, f))))
    # |a_i| = |b_i| = 1 keeps f tight, so the bound stays below 1
    n = 8
    model = random_bernoulli(n, rng)
    po = PotentialOutcomes(rng.choice([-1.0, 1.0], n), rng.choice([-1.0, 1.0], n))
    run = simulate(po, model, IidDesign(n), 100_000, rng, "net")
    t = 2.0 * math.sqrt(run.variance)
    tail = float(np.mean(np.abs(run.values - run.tau) >= t))
    bound = net.chebyshev_bound(model, 1.0, t)
    ok = worst <= 1e-10 and tail <= bound
    record(10, "M bound tight at a=b=sqrt(f); Chebyshev dominates tail", ok,
           f"max |Var - tr M| {worst:.2e} over 10 n=3 instances; n={n} tail {tail:.4f} <= bound {bound:.4f} at t={t:.4f}")


def test_criterion_11_components():
    rng = np.random.default_rng(SEED + 11)
    model = two_component_model(3, rng)
    comp = net.components(model)
    po = PotentialOutcomes(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
    mom = net.DesignMoments.iid(3)
    parts = net.per_component_variance(po, model, mom)
    gap = abs(sum(parts) - net.exact_network_variance(po, model, mom))
    k = net.k_tensor(model).values
    lab = comp.labels
    same = (lab[:, None, None] == lab[None, :, None]) & (lab[None, :, None] == lab[None, None, :])
    cross = float(np.max(np.abs(k[~same])))
    ok = comp.count == 2 and gap <= 1e-10 and cross <= 1e-14
    record(11, "per-component variance and K zero pattern", ok,
           f"components {comp.sets}, sum gap {gap:.2e}, max cross |K| {cross:.1e}")


def test_criterion_12_lp():
    zero1 = net.GraphModel.deterministic(np.zeros((1, 1)))
    res1 = solve_lp(build_lp(zero1))
    n1_ok = abs(res1.value - 4.0) <= 1e-9 and np.allclose(res1.design.probs, 0.5, atol=1e-9)
    rng = np.random.default_rng(SEED + 12)
    models = [zero1, net.GraphModel.deterministic(np.zeros((2, 2)))] + [random_bernoulli(2, r) for r in rng.spawn(3)]
    worst = 0.0
    for model in models:
        grid, _ = grid_oracle(model)
        worst = max(worst, abs(solve_lp(build_lp(model)).value - grid))
    record(12, "LP optimum vs grid oracle; n=1 exact", n1_ok and worst <= 1e-6,
           f"n=1 value {res1.value:.12g}, design {np.round(res1.design.probs, 12).tolist()}; "
           f"max |LP - grid| {worst:.2e} over {len(models)} models")


def test_criterion_13_variance_scaling():
    rng = np.random.default_rng(SEED + 13)
    base_a, base_b = np.array([3.0, 1.0]), np.array([1.0, 2.0])
    variances = {}
    for n, stream in zip((25, 100, 400), rng.spawn(3)):
        a = np.resize(base_a, n)
        b = np.resize(base_b, n)
        z = IidDesign(n).sample(stream, 100_000)
        est = tau_ht(observe(PotentialOutcomes(a, b), z), z)
        variances[n] = float(est.var(ddof=1))
    ratios = [variances[25] / variances[100], variances[100] / variances[400]]
    ok = all(4 / 1.3 <= r <= 4 * 1.3 for r in ratios)
    record(13, "Var(tau_ht) scales as 1/n under iid", ok,
           "Var " + ", ".join(f"n={n}: {v:.5f}" for n, v in variances.items())
           + f"; successive ratios {ratios[0]:.3f}, {ratios[1]:.3f} (target 4, factor 1.3)")


if __name__ == "__main__":
    fails = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                fails += 1
    sys.exit(1 if fails else 0)
