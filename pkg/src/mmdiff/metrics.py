"""Sample-cloud comparison metrics: marginal histogram KL, 1d W1 and Sinkhorn."""

from dataclasses import dataclass

import numpy as np

from .rng import Stage, stream


def _points(s):
    return np.atleast_2d(np.asarray(getattr(s, "points", s), dtype=float))


@dataclass(frozen=True)
class HistogramSpec:
    n_bins: int = 100
    pad: float = 0.01
    smoothing: float = 1e-10

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be at least 2")


def marginal_kl(a, b, dim: int, spec: HistogramSpec = HistogramSpec()) -> float:
    """KL(p_a || p_b) between smoothed histograms of coordinate ``dim``."""
    A, B = _points(a), _points(b)
    if A.size == 0 or B.size == 0:
        raise ValueError("marginal_kl needs two non-empty sample sets")
    if not (0 <= dim < A.shape[1] and dim < B.shape[1]):
        raise ValueError(f"dimension {dim} out of range")
    xa, xb = A[:, dim], B[:, dim]
    lo = min(xa.min(), xb.min())
    hi = max(xa.max(), xb.max())
    width = hi - lo if hi > lo else 1.0
    edges = np.linspace(lo - spec.pad * width, hi + spec.pad * width, spec.n_bins + 1)
    p = np.histogram(xa, edges)[0] + spec.smoothing
    q = np.histogram(xb, edges)[0] + spec.smoothing
    p /= p.sum()
    q /= q.sum()
    return float(max(np.sum(p * np.log(p / q)), 0.0))


def wasserstein_1d(a, b) -> float:
    """W1 between two empirical 1d laws.

    Equal sizes: mean absolute difference of the sorted samples.  Otherwise
    the exact integral of ``|F_a - F_b|`` over the merged support.
    """
    a = np.sort(np.asarray(a, dtype=float).reshape(-1))
    b = np.sort(np.asarray(b, dtype=float).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise ValueError("wasserstein_1d needs non-empty inputs")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    allv = np.sort(np.concatenate([a, b]))
    Fa = np.searchsorted(a, allv[:-1], side="right") / a.size
    Fb = np.searchsorted(b, allv[:-1], side="right") / b.size
    return float(np.sum(np.abs(Fa - Fb) * np.diff(allv)))


@dataclass
class SinkhornResult:
    cost: float
    converged: bool
    n_iter: int
    marginal_error: float
    plan: np.ndarray = None


def _lse(M, axis):
    # leaner than scipy's logsumexp; the Sinkhorn loop calls this a lot
    mx = M.max(axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    return np.log(np.exp(M - mx).sum(axis=axis)) + np.squeeze(mx, axis=axis)


def _subsample(X, cap, seed, tag):
    if len(X) <= cap:
        return X
    idx = stream(seed, Stage.METRICS, tag).choice(len(X), size=cap, replace=False)
    return X[np.sort(idx)]


def sinkhorn(a, b, reg: float, max_iters: int = 10000, tol: float = 1e-9,
             max_points: int = 2000, seed: int = 0, keep_plan: bool = False) -> SinkhornResult:
    """Entropic OT between uniform clouds with squared Euclidean cost.

    Log-domain iterations on the potentials; stops once the row marginals
    of the plan are within ``tol`` (L1) of uniform.  Returns the transport
    cost ``<P, C>`` without the entropy term.
    """
    if reg <= 0:
        raise ValueError("reg must be positive")
    A, B = _points(a), _points(b)
    if A.size == 0 or B.size == 0:
        raise ValueError("sinkhorn needs two non-empty sample sets")
    if A.shape[1] != B.shape[1]:
        raise ValueError("dimension mismatch")
    A = _subsample(A, max_points, seed, 0)
    B = _subsample(B, max_points, seed, 1)
    C = np.maximum((A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T, 0.0)
    n, m = C.shape
    log_a, log_b = -np.log(n), -np.log(m)
    f = np.zeros(n)
    g = np.zeros(m)
    # epsilon scaling: warm-start the potentials on a decreasing sequence of
    # regularizations, which cuts the iteration count at small reg
    eps = max(reg, float(C.max()))
    while eps > reg:
        for _ in range(10):
            f = -eps * _lse((g[None, :] - C) / eps + log_b, axis=1)
            g = -eps * _lse((f[:, None] - C) / eps + log_a, axis=0)
        eps = max(reg, eps / 2.0)
    err, it, converged = np.inf, 0, False
    for it in range(1, max_iters + 1):
        f = -reg * _lse((g[None, :] - C) / reg + log_b, axis=1)
        g = -reg * _lse((f[:, None] - C) / reg + log_a, axis=0)
        if it % 10 == 0 or it == max_iters:
            logP = (f[:, None] + g[None, :] - C) / reg + log_a + log_b
            err = float(np.abs(np.exp(_lse(logP, axis=1)) - 1.0 / n).sum())
            if err < tol:
                converged = True
                break
    K = -C / reg
    P = np.exp(K + (f[:, None] + g[None, :]) / reg + log_a + log_b)
    cost = float(np.sum(P * C))
    return SinkhornResult(cost, converged, it, err, P if keep_plan else None)
