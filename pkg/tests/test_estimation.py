import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rctnet.designs import GramSchmidtWalk, GswConfig, IidDesign, PermutedBlock, BlockSpec, RandomAllocation
from rctnet.errors import LengthMismatch, SingularModel
from rctnet.estimation import (
    PotentialOutcomes,
    ht_error,
    mismatch_matrix,
    net_error_terms,
    observe,
    tau_ht,
    tau_net,
    tau_true,
)


def test_observe_examples():
    po = PotentialOutcomes([1, 2], [3, 4])
    np.testing.assert_array_equal(observe(po, [1, -1]), [1, 4])
    np.testing.assert_array_equal(observe(PotentialOutcomes([5], [7]), [-1]), [7])
    same = PotentialOutcomes([1, 2, 3], [1, 2, 3])
    for z in ([1, 1, 1], [-1, 1, -1]):
        np.testing.assert_array_equal(observe(same, z), [1, 2, 3])


def test_length_checks():
    with pytest.raises(LengthMismatch):
        PotentialOutcomes([1, 2], [1])
    with pytest.raises(LengthMismatch):
        observe(PotentialOutcomes([1, 2], [1, 2]), [1])
    with pytest.raises(LengthMismatch):
        tau_ht([1, 2], [1])


def test_tau_examples():
    assert tau_true(PotentialOutcomes([1, 1], [1, 1])) == 0
    assert tau_true(PotentialOutcomes([2, 2], [0, 0])) == 2
    assert tau_true(PotentialOutcomes([1, 0, 3], [0, 1, 1])) == pytest.approx(2 / 3)


def test_tau_ht_examples():
    assert tau_ht([1, 1], [1, -1]) == 0
    assert tau_ht([3], [1]) == 6
    po = PotentialOutcomes([1, 1], [0, 0])
    for z in ([1, -1], [-1, 1]):
        assert tau_ht(observe(po, z), z) == pytest.approx(1.0)


def test_tau_net_examples():
    a = np.array([[0, 0.5], [0.5, 0]])
    assert tau_net([1, 1], [1, -1], a) == pytest.approx(0.0, abs=1e-15)
    y = np.array([0.3, -1.2, 2.0])
    z = np.array([1, -1, 1])
    assert tau_net(y, z, np.zeros((3, 3))) == pytest.approx(tau_ht(y, z))
    # C = A deterministic: inverting the model recovers the interference-free HT
    amat = np.array([[0, 0.2, 0.1], [0.3, 0, 0], [0, 0.4, 0]])
    yp = (np.eye(3) + amat) @ y
    assert tau_net(yp, z, amat) == pytest.approx(tau_ht(y, z))


def test_tau_net_singular():
    with pytest.raises(SingularModel):
        tau_net([1, 1], [1, -1], [[0, -1], [-1, 0]])


def test_ht_error_examples():
    po = PotentialOutcomes([2, 0], [0, 0])
    z = np.array([1, 1])
    assert ht_error(po, z) == pytest.approx(1.0)
    assert tau_ht(observe(po, z), z) == 2 and po.tau == 1
    anti = PotentialOutcomes([1, -2], [-1, 2])
    assert ht_error(anti, [1, -1]) == 0


def test_net_error_terms_examples(rng):
    a = rng.uniform(0, 0.3, (3, 3))
    np.fill_diagonal(a, 0)
    po = PotentialOutcomes(rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3))
    z = np.array([1, -1, 1])
    base, network = net_error_terms(po, z, a, a)
    assert network == pytest.approx(0.0, abs=1e-14)
    anti = PotentialOutcomes(po.a, -po.a)
    assert net_error_terms(anti, z, a, a + 0.1)[0] == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(mismatch_matrix(a, a), 0, atol=1e-14)


outcomes = st.lists(st.floats(-10, 10), min_size=1, max_size=8)


@given(st.data())
def test_error_identity(data):
    n = data.draw(st.integers(1, 8))
    a = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n)))
    b = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n)))
    z = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n)))
    po = PotentialOutcomes(a, b)
    assert tau_ht(observe(po, z), z) - po.tau == pytest.approx(ht_error(po, z), abs=1e-12)
    assert ht_error(po, -z) == pytest.approx(-ht_error(po, z), abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_net_error_decomposition(seed):
    r = np.random.default_rng(seed)
    n = 3
    a = r.uniform(0, 0.4, (n, n))
    np.fill_diagonal(a, 0)
    c = r.uniform(0, 0.4, (n, n))
    np.fill_diagonal(c, 0)
    po = PotentialOutcomes(r.uniform(-10, 10, n), r.uniform(-10, 10, n))
    z = r.choice([-1, 1], n)
    yp = (np.eye(n) + c) @ observe(po, z)
    base, network = net_error_terms(po, z, a, c)
    assert base + network == pytest.approx(tau_net(yp, z, a) - po.tau, abs=1e-10)


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(1, 5))
def test_constant_outcomes_balanced(alpha, beta, half):
    po = PotentialOutcomes(np.full(2 * half, alpha), np.full(2 * half, beta))
    z = RandomAllocation(2 * half).sample(np.random.default_rng(half), 1)[0]
    assert tau_ht(observe(po, z), z) == pytest.approx(alpha - beta, abs=1e-12)


@pytest.mark.parametrize(
    "design",
    [
        IidDesign(6),
        RandomAllocation(6),
        PermutedBlock(BlockSpec([[0, 1], [2, 3, 4, 5]])),
        GramSchmidtWalk(GswConfig(0.3, np.random.default_rng(1).standard_normal((6, 2)))),
    ],
    ids=["iid", "allocation", "block", "gsw"],
)
def test_ht_unbiased(design):
    r = np.random.default_rng(5)
    po = PotentialOutcomes(r.uniform(-5, 5, 6), r.uniform(-5, 5, 6))
    z = design.sample(r, 100_000)
    est = tau_ht(observe(po, z), z)
    assert abs(est.mean() - po.tau) <= 3 * est.std(ddof=1) / np.sqrt(est.size)
