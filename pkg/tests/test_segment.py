import numpy as np
import pytest
from scipy.optimize import minimize

from mmdiff.modefind import MultiStartConfig, find_modes
from mmdiff.segment import SvcModel, rbf_kernel, smo_solve, svc_classify, svc_train
from mmdiff.targets import gmm2d


def two_blobs(rng, n=100):
    a = rng.normal(size=(n, 2)) * 0.5 + [6, 0]
    b = rng.normal(size=(n, 2)) * 0.5 + [-6, 0]
    return np.vstack([a, b]), np.repeat([0, 1], n)


def xor(rng, n=40):
    centers = np.array([[1, 1], [-1, -1], [1, -1], [-1, 1]], float)
    X = np.vstack([c + 0.3 * rng.normal(size=(n, 2)) for c in centers])
    return X, np.repeat([0, 0, 1, 1], n)


def dual_objective(alpha, K, y):
    Q = (y[:, None] * y[None]) * K
    return alpha.sum() - 0.5 * alpha @ Q @ alpha


def test_separable_blobs(rng):
    X, y = two_blobs(rng)
    model = svc_train(X, y)
    assert np.array_equal(svc_classify(model, X)[0], y)


def test_xor_against_reference_qp(rng):
    X, y = xor(rng)
    model = svc_train(X, y, gamma=1.0, tol=1e-5)
    assert np.mean(svc_classify(model, X)[0] == y) >= 0.95
    ys = np.where(y == 0, 1.0, -1.0)
    K = rbf_kernel(X, X, 1.0)
    ours = smo_solve(K, ys, 1.0, 1e-5)
    Q = (ys[:, None] * ys[None]) * K
    ref = minimize(lambda a: -(a.sum() - 0.5 * a @ Q @ a), np.zeros(len(ys)),
                   jac=lambda a: -(1 - Q @ a), bounds=[(0, 1.0)] * len(ys),
                   constraints=[{"type": "eq", "fun": lambda a: a @ ys, "jac": lambda a: ys}],
                   method="SLSQP", options={"maxiter": 500, "ftol": 1e-12})
    assert dual_objective(ours.alpha, K, ys) >= -ref.fun - 1e-4 * abs(ref.fun)


def test_kkt_and_feasibility(rng):
    X, y = xor(rng, 30)
    ys = np.where(y == 0, 1.0, -1.0)
    K = rbf_kernel(X, X, 1.0)
    C, tol = 1.0, 1e-4
    res = smo_solve(K, ys, C, tol)
    a = res.alpha
    assert np.all(a >= -1e-12) and np.all(a <= C + 1e-12)
    assert abs(a @ ys) < 1e-6
    f = K @ (a * ys) + res.bias
    m = ys * f
    free = (a > 1e-8) & (a < C - 1e-8)
    assert np.all(m[a <= 1e-8] >= 1 - 10 * tol)
    assert np.all(m[a >= C - 1e-8] <= 1 + 10 * tol)
    assert np.allclose(m[free], 1, atol=10 * tol)


def test_dual_objective_non_decreasing(rng):
    X, y = xor(rng, 25)
    ys = np.where(y == 0, 1.0, -1.0)
    res = smo_solve(rbf_kernel(X, X, 1.0), ys, 1.0, 1e-4, record=True)
    assert len(res.objective) > 1
    assert np.all(np.diff(res.objective) >= -1e-10)


def test_midpoint_symmetry():
    X = np.array([[2.0, 0.0], [3.0, 1.0], [3.0, -1.0], [-2.0, 0.0], [-3.0, 1.0], [-3.0, -1.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = svc_train(X, y, gamma=0.3)
    assert abs(model.decision_values([[0.0, 0.0]])[0, 0]) < 1e-6
    assert abs(model.decision_values([[0.0, 5.0]])[0, 0]) < 1e-6


def test_three_class_vote_matches_enumeration(rng):
    centers = np.array([[0, 5], [5, -3], [-5, -3]], float)
    X = np.vstack([c + rng.normal(size=(40, 2)) for c in centers])
    y = np.repeat([0, 1, 2], 40)
    model = svc_train(X, y)
    Q = rng.uniform(-8, 8, (300, 2))
    labels, _ = svc_classify(model, Q)
    dv = model.decision_values(Q)
    for q, lab, row in zip(Q, labels, dv):
        votes = np.zeros(3)
        strength = np.zeros(3)
        for m, v in zip(model.machines, row):
            w = m.pos if v >= 0 else m.neg
            votes[w] += 1
            strength[w] += abs(v)
        best = np.flatnonzero(votes == votes.max())
        assert lab == best[np.argmax(strength[best])]


def test_gmm_multistart_boundary():
    t = gmm2d(2.0).target()
    modes = find_modes(t, MultiStartConfig(n_starts=1500, n_iters=1000))
    train, test = slice(0, 1000), slice(1000, None)
    model = svc_train(modes.start_points[train], modes.assignments[train])
    pred = svc_classify(model, modes.start_points[test])[0]
    assert np.mean(pred == modes.assignments[test]) >= 0.98


def test_partition_dense_grid(rng):
    X, y = two_blobs(rng, 50)
    model = svc_train(X, y)
    g = np.linspace(-15, 15, 61)
    G = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    labels, margins = svc_classify(model, G)
    assert labels.shape == (len(G),) and set(labels) <= {0, 1}
    assert np.all(np.isfinite(margins))


def test_serialization_round_trip(rng):
    X, y = xor(rng, 20)
    model = svc_train(X, y, gamma=1.0)
    back = SvcModel.from_dict(model.to_dict())
    Q = rng.uniform(-2, 2, (50, 2))
    assert np.array_equal(svc_classify(model, Q)[0], svc_classify(back, Q)[0])
    assert np.allclose(model.decision_values(Q), back.decision_values(Q), rtol=0, atol=1e-12)


def test_errors(rng):
    with pytest.raises(ValueError, match="two classes"):
        svc_train(np.zeros((3, 2)), [1, 1, 1])
    X, y = two_blobs(rng, 10)
    with pytest.raises(ValueError, match="dimension"):
        svc_classify(svc_train(X, y), np.zeros(3))


def test_stratified_subsample(rng):
    X, y = two_blobs(rng, 300)
    model = svc_train(X, y, max_train=100)
    assert len(model.support_vectors) <= 100
    assert np.mean(svc_classify(model, X)[0] == y) == 1.0
