import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rctnet import _backend
from rctnet.designs import (
    INTEGRALITY_EPS,
    BlockSpec,
    GramSchmidtWalk,
    GswConfig,
    IidDesign,
    PermutedBlock,
    RandomAllocation,
    gsw_design,
    iid_design,
    imbalance_probability,
    permuted_block,
    random_allocation,
)
from rctnet.errors import DegeneratePhi, OddBlock, OddPopulation, TooSmallN

N = 100_000


def freqs(z):
    counts = Counter(map(tuple, z.tolist()))
    return {k: v / z.shape[0] for k, v in counts.items()}


def test_iid_single_unit():
    z = iid_design(1, np.random.default_rng(0))
    assert z.shape == (1,) and z[0] in (-1, 1)


def test_iid_n2_uniform(rng):
    f = freqs(IidDesign(2).sample(rng, N))
    assert len(f) == 4
    assert all(abs(v - 0.25) <= 0.01 for v in f.values())


def test_allocation_examples(rng):
    z = RandomAllocation(2).sample(rng, 1000)
    assert set(map(tuple, z.tolist())) == {(1, -1), (-1, 1)}
    assert np.all(RandomAllocation(10).sample(rng, 500).sum(axis=1) == 0)
    f = freqs(RandomAllocation(4).sample(rng, N))
    assert len(f) == 6
    assert all(abs(v - 1 / 6) <= 0.01 for v in f.values())
    assert random_allocation(6, rng).sum() == 0


def test_allocation_odd():
    with pytest.raises(OddPopulation):
        RandomAllocation(3)


def test_blocks(rng):
    spec = BlockSpec([[0, 1], [2, 3]])
    z = PermutedBlock(spec).sample(rng, N)
    assert np.all(z[:, :2].sum(axis=1) == 0) and np.all(z[:, 2:].sum(axis=1) == 0)
    f = freqs(z)
    assert len(f) == 4
    assert all(abs(v - 0.25) <= 0.01 for v in f.values())
    assert permuted_block(spec, rng).shape == (4,)


def test_single_block_matches_allocation(rng):
    f = freqs(PermutedBlock(BlockSpec([[0, 1, 2, 3]])).sample(rng, N))
    assert len(f) == 6
    assert all(abs(v - 1 / 6) <= 0.01 for v in f.values())


def test_odd_block():
    with pytest.raises(OddBlock) as err:
        PermutedBlock(BlockSpec([[0, 1], [2, 3, 4]]))
    assert err.value.index == 1


def test_block_spec_must_partition():
    with pytest.raises(ValueError):
        BlockSpec([[0, 1], [1, 2]])
    with pytest.raises(ValueError):
        BlockSpec([[0, 2]])


def test_imbalance_examples():
    assert imbalance_probability(200, 0.6) < 0.0047
    assert imbalance_probability(200, 0.6) == pytest.approx(0.00469, abs=5e-5)
    assert imbalance_probability(100, 0.6) == pytest.approx(0.0455, abs=1e-4)
    assert imbalance_probability(50, 0.5 + 1e-12) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(TooSmallN):
        imbalance_probability(29, 0.6)


@given(st.integers(30, 10_000), st.floats(0.501, 1.0))
def test_imbalance_decreasing_in_n(n, t):
    assert imbalance_probability(n + 10, t) <= imbalance_probability(n, t)


def test_phi_bounds():
    x = np.ones((3, 1))
    for phi in (0.0, -0.1, 1.5, float("nan")):
        with pytest.raises(DegeneratePhi):
            GswConfig(phi, x)
    GswConfig(1.0, x)


def test_xi_and_zero_covariates():
    cfg = GswConfig(0.5, [[3.0, 4.0], [1.0, 0.0]])
    assert cfg.xi == 5.0
    zero = GswConfig(0.5, np.zeros((3, 2)))
    assert zero.xi == 0.0
    np.testing.assert_array_equal(zero.b_matrix()[3:], 0)


def test_gsw_phi_one_is_iid(rng):
    cfg = GswConfig(1.0, rng.standard_normal((3, 2)))
    f = freqs(GramSchmidtWalk(cfg).sample(rng, N))
    assert len(f) == 8
    assert all(abs(v - 1 / 8) <= 0.01 for v in f.values())


def test_gsw_n2_prefers_balance(rng):
    cfg = GswConfig(0.5, np.ones((2, 1)))
    z = GramSchmidtWalk(cfg).sample(rng, N)
    balanced = np.mean(z.sum(axis=1) == 0)
    assert balanced > 0.5
    # enumerating the two-step branch tree gives exactly 3/4
    assert balanced == pytest.approx(0.75, abs=0.01)


@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.integers(0, 3), st.floats(0.05, 1.0))
def test_gsw_trace_properties(seed, n, d, phi):
    r = np.random.default_rng(seed)
    cfg = GswConfig(phi, r.standard_normal((n, d)))
    z, tr = gsw_design(cfg, r, trace=True)
    assert set(np.unique(z)) <= {-1, 1}
    assert tr.iterations <= n
    for step in tr.steps:
        assert step.direction[step.pivot] == 1.0
        assert np.all(np.abs(step.z_before) <= 1 + 1e-12)
        assert step.delta in (0.0, step.delta_plus, -step.delta_minus)


@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(0, 4), st.floats(0.05, 1.0))
def test_backends_agree(seed, n, d, phi):
    r = np.random.default_rng(seed)
    cfg = GswConfig(phi, r.standard_normal((n, d)))
    uni = r.random((20, 2 * n))
    xs = cfg.scaled_covariates()
    ref = np.stack([gsw_design(cfg, uniforms=u) for u in uni])
    for name in _backend.AVAILABLE:
        np.testing.assert_array_equal(_backend.gsw_walk(xs, phi, INTEGRALITY_EPS, uni, name), ref)


def test_compiled_backend_present():
    if "cython" not in _backend.AVAILABLE:
        pytest.skip("compiled kernel not built")
    assert _backend.BACKEND == "cython"


def test_martingale_steps(rng):
    # conditional on (delta+, delta-), the signed step has mean zero
    cfg = GswConfig(0.4, rng.standard_normal((6, 2)))
    signed, scale = [], []
    for _ in range(4000):
        _, tr = gsw_design(cfg, rng, trace=True)
        for s in tr.steps:
            if s.delta != 0.0:
                signed.append(s.delta)
                scale.append(s.delta_plus * s.delta_minus / (s.delta_plus + s.delta_minus))
    signed = np.array(signed)
    scale = np.array(scale)
    bins = np.quantile(scale, [0, 0.25, 0.5, 0.75, 1.0])
    idx = np.clip(np.searchsorted(bins, scale, side="right") - 1, 0, 3)
    for b in range(4):
        sel = signed[idx == b]
        assert abs(sel.mean()) <= 3 * sel.std(ddof=1) / math.sqrt(sel.size)


@pytest.mark.parametrize(
    "design",
    [
        IidDesign(8),
        RandomAllocation(8),
        PermutedBlock(BlockSpec([[0, 3], [1, 2, 4, 5, 6, 7]])),
        GramSchmidtWalk(GswConfig(0.3, np.random.default_rng(3).standard_normal((8, 3)))),
    ],
    ids=["iid", "allocation", "block", "gsw"],
)
def test_marginals_and_diagonal(design, rng):
    z = design.sample(rng, N).astype(float)
    assert np.all(np.abs(z.mean(axis=0)) <= 3 / math.sqrt(N))
    cov = np.cov(z, rowvar=False)
    assert np.all(np.abs(np.diag(cov) - 1) <= 0.02)
    assert abs(np.trace(cov) - 8) <= 8 * 0.02


def test_samplers_reproducible():
    cfg = GswConfig(0.5, np.random.default_rng(0).standard_normal((5, 2)))
    for design in (IidDesign(5), RandomAllocation(6), GramSchmidtWalk(cfg)):
        a = design.sample(np.random.default_rng(11), 50)
        b = design.sample(np.random.default_rng(11), 50)
        np.testing.assert_array_equal(a, b)
