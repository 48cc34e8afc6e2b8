import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import wasserstein_distance

from mmdiff.metrics import HistogramSpec, marginal_kl, sinkhorn, wasserstein_1d
from mmdiff.samples import SampleSet


def exact_ot(a, b):
    """Equal-size uniform clouds: the optimum is a permutation; enumerate them all."""
    C = ((a[:, None] - b[None]) ** 2).sum(-1)
    n = len(a)
    return min(C[np.arange(n), list(p)].sum() for p in itertools.permutations(range(n))) / n


def _null_kl(n, seeds=20):
    out = []
    for s in range(seeds):
        x = np.random.default_rng(s).normal(size=(2 * n, 1))
        out.append(marginal_kl(x[:n], x[n:], 0))
    return np.array(out)


def test_kl_examples(rng):
    a = rng.normal(size=(5000, 2))
    assert marginal_kl(a, a, 0) < 1e-12
    assert marginal_kl(SampleSet(a), SampleSet(a), 1) < 1e-12
    far = marginal_kl(rng.normal(size=(10000, 1)), rng.normal(6, 1, size=(10000, 1)), 0)
    assert far > 1 and np.isfinite(far)


def test_kl_sampling_noise_calibration():
    # Two independent N(0,1) draws.  Tail bins that one side leaves empty cost
    # about log(1e14)/n each under the 1e-10 smoothing, which puts the 10^4
    # noise level near 2.5e-2; at 2*10^4 per side it falls to about 1e-2.
    small, large = _null_kl(10000), _null_kl(20000)
    assert np.median(small) < 3e-2
    assert np.median(large) < 1.5e-2
    assert np.median(large) < np.median(small)
def test_kl_errors(rng):
    with pytest.raises(ValueError):
        marginal_kl(np.empty((0, 2)), rng.normal(size=(5, 2)), 0)
    with pytest.raises(ValueError, match="out of range"):
        marginal_kl(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)), 2)
    with pytest.raises(ValueError):
        HistogramSpec(n_bins=1)


def test_kl_constant_samples():
    a = np.full((10, 1), 3.0)
    assert marginal_kl(a, a, 0) == 0.0


def test_w1_examples(rng):
    a = rng.normal(size=1000)
    assert wasserstein_1d(a, a) == 0.0
    assert wasserstein_1d(a, a + 2.5) == pytest.approx(2.5, abs=1e-12)
    u = rng.uniform(0, 1, 100000)
    v = rng.uniform(0, 2, 100000)
    assert wasserstein_1d(u, v) == pytest.approx(0.5, rel=0.01)
    with pytest.raises(ValueError):
        wasserstein_1d([], [1.0])


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40),
       st.lists(st.floats(-100, 100), min_size=1, max_size=40),
       st.floats(-50, 50))
def test_w1_matches_scipy_and_shift(a, b, c):
    assert wasserstein_1d(a, b) == pytest.approx(wasserstein_distance(a, b), rel=1e-9, abs=1e-9)
    a = np.array(a)
    assert wasserstein_1d(a, a + c) == pytest.approx(abs(c), rel=1e-9, abs=1e-9)


@given(*(st.lists(st.floats(-10, 10), min_size=1, max_size=20) for _ in range(3)))
def test_w1_triangle(a, b, c):
    assert wasserstein_1d(a, c) <= wasserstein_1d(a, b) + wasserstein_1d(b, c) + 1e-9


def test_sinkhorn_single_point():
    a = np.ones((5, 2))
    res = sinkhorn(a, a, reg=0.05)
    assert res.cost == pytest.approx(0.0, abs=1e-12) and res.converged


@pytest.mark.parametrize("seed", range(4))
def test_sinkhorn_matches_exact_ot(seed):
    g = np.random.default_rng(seed)
    n = g.integers(3, 9)
    a, b = g.normal(size=(n, 2)), g.normal(size=(n, 2)) + 0.5
    res = sinkhorn(a, b, reg=1e-3, max_iters=20000)
    # near-tied assignments split the plan and converge slowly; the cost does not care
    assert res.converged or res.marginal_error < 1e-5
    assert res.cost == pytest.approx(exact_ot(a, b), rel=0.01)


def test_sinkhorn_symmetry_and_marginals(rng):
    a, b = rng.normal(size=(40, 3)), rng.normal(size=(30, 3)) + 1
    ab = sinkhorn(a, b, reg=0.5, tol=1e-13, keep_plan=True)
    ba = sinkhorn(b, a, reg=0.5, tol=1e-13)
    assert ab.cost == pytest.approx(ba.cost, abs=1e-9)
    assert np.abs(ab.plan.sum(1) - 1 / 40).sum() < 1e-9
    assert np.abs(ab.plan.sum(0) - 1 / 30).sum() < 1e-8
    self_cost = sinkhorn(a, a, reg=0.5).cost
    assert self_cost >= 0
    assert sinkhorn(a, a, reg=1e-3).cost < self_cost


def test_sinkhorn_flags_nonconvergence(rng):
    res = sinkhorn(rng.normal(size=(20, 2)), rng.normal(size=(20, 2)) + 3, reg=1e-3, max_iters=3)
    assert not res.converged and res.n_iter == 3


def test_sinkhorn_subsamples_large_clouds(rng):
    a, b = rng.normal(size=(3000, 2)), rng.normal(size=(2500, 2))
    r1 = sinkhorn(a, b, reg=0.5, max_points=300, keep_plan=True, seed=4)
    r2 = sinkhorn(a, b, reg=0.5, max_points=300, seed=4)
    assert r1.plan.shape == (300, 300) and r1.cost == r2.cost


def test_sinkhorn_errors(rng):
    with pytest.raises(ValueError):
        sinkhorn(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), reg=0)
    with pytest.raises(ValueError, match="dimension"):
        sinkhorn(rng.normal(size=(3, 2)), rng.normal(size=(3, 3)), reg=1)
