"""Iterative Gaussian bridge sampling for per-component normalizing constants."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .rng import Stage, blocked_rows
from .segment import svc_classify

LOG_2PI = np.log(2.0 * np.pi)


class EstimationError(RuntimeError):
    pass


@dataclass
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        self._chol = np.linalg.cholesky(self.cov)
        d = len(self.mean)
        self.log_norm = -0.5 * d * LOG_2PI - np.log(np.diag(self._chol)).sum()

    @property
    def dim(self) -> int:
        return len(self.mean)

    def log_pdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.linalg.solve(self._chol, (x - self.mean).T)
        return self.log_norm - 0.5 * np.einsum("ij,ij->j", u, u)

    def sample(self, n, gen):
        return self.mean + gen.standard_normal((n, self.dim)) @ self._chol.T


def fit_proposal(samples, ridge: float = 1e-6) -> Gaussian:
    """Moment-matched Gaussian with ``ridge * I`` added to the covariance."""
    X = np.atleast_2d(np.asarray(getattr(samples, "points", samples), dtype=float))
    n, d = X.shape
    if n < d + 1:
        raise ValueError(f"need at least d+1={d + 1} samples to fit a proposal, got {n}")
    mean = X.mean(axis=0)
    C = X - mean
    cov = C.T @ C / (n - 1) + ridge * np.eye(d)
    return Gaussian(mean, 0.5 * (cov + cov.T))


@dataclass
class BridgeConfig:
    n_proposal: int = 10000
    n_target: int = 10000
    max_iters: int = 50
    rel_tol: float = 1e-6
    covariance_ridge: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if min(self.n_proposal, self.n_target, self.max_iters) < 1:
            raise ValueError("bridge sample counts and max_iters must be positive")


@dataclass
class RatioEstimate:
    log_ratio: float
    iterates: list = field(default_factory=list)   # log-ratio after each update
    converged: bool = False

    @property
    def lambda_ratio(self) -> float:
        return float(np.exp(self.log_ratio))

    @property
    def n_iterations(self) -> int:
        """Fixed-point updates after the initial importance-sampling estimate."""
        return len(self.iterates) - 1


def restricted_log_density(target, model=None, label=None):
    """``log rho`` on the subdomain labelled ``label`` by ``model``, ``-inf`` elsewhere."""
    def log_rho_k(x):
        x = np.atleast_2d(x)
        out = target.log_density(x)
        if model is not None:
            out = np.where(svc_classify(model, x)[0] == label, out, -np.inf)
        return out
    return log_rho_k


def _log_mean(v):
    return logsumexp(v) - np.log(len(v))


def bridge_iterate(log_rho_hat, target_samples, proposal: Gaussian, cfg: BridgeConfig,
                   component: int = 0) -> RatioEstimate:
    """Estimate ``Lambda_k / Lambda_phi`` (``Lambda_phi = 1``: the proposal is normalized).

    ``log_rho_hat`` maps an (n, d) array to log values, ``-inf`` outside the
    subdomain.  The first estimate uses ``alpha = 1/phi``; each later one
    plugs the current ratio into the optimal bridge function.
    """
    X = np.atleast_2d(np.asarray(getattr(target_samples, "points", target_samples), dtype=float))
    X = X[:cfg.n_target]
    Xp = blocked_rows(cfg.seed, Stage.BRIDGE, (component,), 0, cfg.n_proposal,
                      lambda g, m: proposal.sample(m, g))
    Nk, Np = len(X), len(Xp)
    lr_t, lphi_t = np.asarray(log_rho_hat(X), float), proposal.log_pdf(X)
    lr_p, lphi_p = np.asarray(log_rho_hat(Xp), float), proposal.log_pdf(Xp)
    if np.any(np.isnan(lr_t)) or np.any(np.isnan(lr_p)):
        raise EstimationError("restricted density returned NaN")

    # alpha = 1/phi: the denominator is identically one
    log_r = _log_mean(lr_p - lphi_p)
    if not np.isfinite(log_r):
        raise EstimationError("no proposal draw falls where the component has mass; "
                              "refit the proposal on better target samples")
    iterates = [float(log_r)]
    log_NkNp = np.log(Nk + Np)
    converged = False
    for _ in range(cfg.max_iters):
        log_den_p = np.logaddexp(np.log(Nk) + lr_p, log_r + np.log(Np) + lphi_p)
        log_den_t = np.logaddexp(np.log(Nk) + lr_t, log_r + np.log(Np) + lphi_t)
        num = _log_mean(lr_p + log_NkNp - log_den_p)
        den = _log_mean(lphi_t + log_NkNp - log_den_t)
        if not np.isfinite(den):
            raise EstimationError("bridge denominator underflowed on every target sample; "
                                  "use a proposal that covers the target samples")
        new = num - den
        iterates.append(float(new))
        change = abs(np.expm1(new - log_r))
        log_r = new
        if change < cfg.rel_tol:
            converged = True
            break
    return RatioEstimate(float(log_r), iterates, converged)


def mixing_ratios(lambdas) -> np.ndarray:
    """``r_k = Lambda_k / sum_j Lambda_j``.  See :func:`mixing_ratios_log` for
    constants that span many decades."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.size == 0 or np.any(~(lam > 0)) or not np.all(np.isfinite(lam)):
        raise ValueError(f"normalizing constants must be positive and finite, got {lam}")
    return lam / lam.sum()


def mixing_ratios_log(log_lambdas) -> np.ndarray:
    ll = np.asarray(log_lambdas, dtype=float)
    if ll.size == 0 or not np.all(np.isfinite(ll)):
        raise ValueError("log normalizing constants must be finite")
    return np.exp(ll - logsumexp(ll))
