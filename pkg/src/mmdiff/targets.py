"""Unnormalized target densities.

Every family is exposed as a :class:`TargetDensity`, which is the only view
the pipeline stages have of a target: a batched log-density, an optional
analytic gradient, and the prior box that multi-start, uniform proposals
and Metropolis initialization draw from.  Log-densities are clamped at
``FLOOR`` so gradient-free stages never see ``-inf``.
"""

import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

FLOOR = -1e8
LOG_2PI = math.log(2.0 * math.pi)


class UnsupportedTargetError(ValueError):
    """Raised when a stage needs something the target does not provide."""


def _batch(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {X.shape[-1]}")
    return X, single


def _unbatch(values, single):
    return values[0] if single else values


@dataclass
class TargetDensity:
    name: str
    dim: int
    log_rho: Callable[[np.ndarray], np.ndarray]
    prior_box: np.ndarray
    grad_log_rho: Optional[Callable[[np.ndarray], np.ndarray]] = None
    spec: object = None

    def __post_init__(self):
        self.prior_box = np.asarray(self.prior_box, dtype=float).reshape(self.dim, 2)

    @property
    def gradient_available(self) -> bool:
        return self.grad_log_rho is not None

    def log_density(self, x):
        X, single = _batch(x, self.dim)
        out = np.maximum(self.log_rho(X), FLOOR)
        out = np.where(np.isnan(out), FLOOR, out)
        return _unbatch(out, single)

    def grad_log_density(self, x):
        if self.grad_log_rho is None:
            raise UnsupportedTargetError(f"target {self.name!r} has no analytic gradient")
        X, single = _batch(x, self.dim)
        return _unbatch(self.grad_log_rho(X), single)

    def energy(self, x):
        return -self.log_density(x)


def _check_weights(weights):
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0) or np.any(w > 1):
        raise ValueError("mixture weights must lie in (0, 1]")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"mixture weights sum to {w.sum()}, not 1")
    return w


def _factor(covs, dim):
    covs = np.asarray(covs, dtype=float)
    if covs.shape[1:] != (dim, dim):
        raise ValueError("covariance shape does not match mean dimension")
    chols, precs, logdets = [], [], []
    for S in covs:
        if not np.allclose(S, S.T, rtol=0, atol=1e-12):
            raise ValueError("covariance is not symmetric")
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        Linv = np.linalg.inv(L)
        chols.append(L)
        precs.append(Linv.T @ Linv)
        logdets.append(2.0 * np.log(np.diag(L)).sum())
    return covs, np.array(chols), np.array(precs), np.array(logdets)


@dataclass
class GaussianMixtureSpec:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        self.weights = _check_weights(self.weights)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        if len(self.weights) != len(self.means):
            raise ValueError("one weight per component required")
        self.covs, self._chol, self._prec, self._logdet = _factor(self.covs, self.dim)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _component_terms(self, X):
        diff = X[:, None, :] - self.means[None]  # (n, K, d)
        pdiff = np.einsum("kij,nkj->nki", self._prec, diff)
        quad = np.einsum("nki,nki->nk", diff, pdiff)
        logc = np.log(self.weights) - 0.5 * (quad + self._logdet + self.dim * LOG_2PI)
        return logc, pdiff

    def sample(self, n, rng):
        labels = rng.choice(len(self.weights), size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        x = self.means[labels] + np.einsum("nij,nj->ni", self._chol[labels], z)
        return x, labels

    def target(self, name="gmm", prior_box=None) -> TargetDensity:
        if prior_box is None:
            prior_box = np.tile([-15.0, 15.0], (self.dim, 1))
        return TargetDensity(name, self.dim, lambda X: gmm_log_density(self, X), prior_box,
                             lambda X: gmm_grad_log_density(self, X), spec=self)


def gmm_log_density(spec: GaussianMixtureSpec, x):
    """log sum_k r_k N(x | mu_k, Sigma_k), stabilized by log-sum-exp."""
    X, single = _batch(x, spec.dim)
    logc, _ = spec._component_terms(X)
    return _unbatch(np.maximum(logsumexp(logc, axis=1), FLOOR), single)


def gmm_grad_log_density(spec: GaussianMixtureSpec, x):
    X, single = _batch(x, spec.dim)
    logc, pdiff = spec._component_terms(X)
    resp = np.exp(logc - logsumexp(logc, axis=1, keepdims=True))
    return _unbatch(-np.einsum("nk,nki->ni", resp, pdiff), single)


def std_normal_cdf(z):
    """Standard normal CDF (Cephes rational approximations via scipy)."""
    return ndtr(z)


@dataclass
class SkewNormalMixtureSpec:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        self.weights = _check_weights(self.weights)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.alphas = np.atleast_2d(np.asarray(self.alphas, dtype=float))
        if not (len(self.weights) == len(self.means) == len(self.alphas)):
            raise ValueError("weights, means and alphas must have one row per component")
        if self.alphas.shape != self.means.shape:
            raise ValueError("skewness vectors must match the mean dimension")
        self.covs, self._chol, self._prec, self._logdet = _factor(self.covs, self.dim)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _component_terms(self, X):
        diff = X[:, None, :] - self.means[None]
        pdiff = np.einsum("kij,nkj->nki", self._prec, diff)
        quad = np.einsum("nki,nki->nk", diff, pdiff)
        u = np.einsum("ki,nki->nk", self.alphas, diff)
        log_phi_cdf = log_ndtr(u)
        logc = (np.log(self.weights) + math.log(2.0) + log_phi_cdf
                - 0.5 * (quad + self._logdet + self.dim * LOG_2PI))
        # d/du log Phi(u) = phi(u) / Phi(u), evaluated in log space for the tails
        mills = np.exp(-0.5 * u * u - 0.5 * LOG_2PI - log_phi_cdf)
        grads = -pdiff + mills[..., None] * self.alphas[None]
        return logc, grads

    def sample(self, n, rng):
        """Additive representation: mu + delta |Z0| + W, W ~ N(0, Sigma - delta delta^T)."""
        labels = rng.choice(len(self.weights), size=n, p=self.weights)
        x = np.empty((n, self.dim))
        for k in range(len(self.weights)):
            idx = np.flatnonzero(labels == k)
            S, a = self.covs[k], self.alphas[k]
            delta = S @ a / math.sqrt(1.0 + a @ S @ a)
            L = np.linalg.cholesky(S - np.outer(delta, delta))
            z0 = np.abs(rng.standard_normal(len(idx)))
            w = rng.standard_normal((len(idx), self.dim)) @ L.T
            x[idx] = self.means[k] + z0[:, None] * delta + w
        return x, labels

    def target(self, name="skewnormal", prior_box=None) -> TargetDensity:
        if prior_box is None:
            prior_box = np.tile([-8.0, 8.0], (self.dim, 1))
        return TargetDensity(name, self.dim, lambda X: skew_normal_log_density(self, X), prior_box,
                             lambda X: skew_normal_grad_log_density(self, X), spec=self)


def skew_normal_log_density(spec: SkewNormalMixtureSpec, x):
    X, single = _batch(x, spec.dim)
    logc, _ = spec._component_terms(X)
    return _unbatch(np.maximum(logsumexp(logc, axis=1), FLOOR), single)


def skew_normal_grad_log_density(spec: SkewNormalMixtureSpec, x):
    X, single = _batch(x, spec.dim)
    logc, grads = spec._component_terms(X)
    resp = np.exp(logc - logsumexp(logc, axis=1, keepdims=True))
    return _unbatch(np.einsum("nk,nki->ni", resp, grads), single)


# -- images -----------------------------------------------------------------

def read_pgm(path) -> np.ndarray:
    """Read a plain (P2) or binary (P5) PGM file into a float array."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    width, height, maxval = tokens
    if magic == b"P2":
        values = [int(v) for v in data[pos:].split(b"#")[0].split()]
        if len(values) < width * height:
            raise ValueError(f"{path}: truncated pixel data")
        img = np.array(values[: width * height], dtype=float)
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        nbytes = width * height * np.dtype(dtype).itemsize
        if len(data) - pos < nbytes:
            raise ValueError(f"{path}: truncated pixel data")
        img = np.frombuffer(data[pos:pos + nbytes], dtype=dtype).astype(float)
    return img.reshape(height, width)


def write_pgm(path, image, binary=False, maxval=255):
    img = np.asarray(image)
    if img.min() < 0 or img.max() > maxval:
        raise ValueError("pixel values out of range")
    img = np.rint(img).astype(np.int64)
    h, w = img.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n".encode()
    if binary:
        body = img.astype(">u2" if maxval > 255 else "u1").tobytes()
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in img).encode() + b"\n"
    Path(path).write_bytes(header + body)


@dataclass
class ImageDensitySpec:
    """Pixel intensities read as an unnormalized density on ``domain_box``.

    Pixel centers sit on a uniform lattice spanning the box; row 0 is the
    top edge (largest second coordinate).
    """

    grid: np.ndarray
    domain_box: np.ndarray = field(default_factory=lambda: np.array([[0.0, 1.0], [0.0, 1.0]]))

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.domain_box = np.asarray(self.domain_box, dtype=float).reshape(2, 2)
        if self.grid.ndim != 2 or min(self.grid.shape) < 2:
            raise ValueError("image grid must be at least 2x2")
        if np.any(self.grid < 0) or not np.any(self.grid > 0):
            raise ValueError("image needs non-negative pixels with at least one positive")

    @classmethod
    def from_pgm(cls, path, domain_box=None):
        grid = read_pgm(path)
        return cls(grid) if domain_box is None else cls(grid, domain_box)

    def target(self, name="image") -> TargetDensity:
        return TargetDensity(name, 2, lambda X: image_density_eval(self, X)[0], self.domain_box,
                             None, spec=self)


def image_density_eval(spec: ImageDensitySpec, x):
    """Bilinear log-intensity and its exact gradient; floor outside the box."""
    X, single = _batch(x, 2)
    H, W = spec.grid.shape
    (x0, x1), (y0, y1) = spec.domain_box
    inside = (X[:, 0] >= x0) & (X[:, 0] <= x1) & (X[:, 1] >= y0) & (X[:, 1] <= y1)
    du_dx = (W - 1) / (x1 - x0)
    dv_dy = -(H - 1) / (y1 - y0)
    u = np.clip((X[:, 0] - x0) * du_dx, 0, W - 1)
    v = np.clip((y1 - X[:, 1]) * -dv_dy, 0, H - 1)
    j = np.minimum(np.floor(u).astype(int), W - 2)
    i = np.minimum(np.floor(v).astype(int), H - 2)
    fu, fv = u - j, v - i
    g = spec.grid
    c00, c01, c10, c11 = g[i, j], g[i, j + 1], g[i + 1, j], g[i + 1, j + 1]
    f = (1 - fu) * (1 - fv) * c00 + fu * (1 - fv) * c01 + (1 - fu) * fv * c10 + fu * fv * c11
    fx = ((1 - fv) * (c01 - c00) + fv * (c11 - c10)) * du_dx
    fy = ((1 - fu) * (c10 - c00) + fu * (c11 - c01)) * dv_dy
    ok = inside & (f > 0)
    safe = np.where(ok, f, 1.0)
    logd = np.where(ok, np.log(safe), FLOOR)
    grad = np.where(ok[:, None], np.stack([fx, fy], axis=1) / safe[:, None], 0.0)
    return _unbatch(logd, single), _unbatch(grad, single)


# -- PDE source inversion ---------------------------------------------------

@dataclass
class PdePosteriorSpec:
    """Posterior over the pollution source x0 under a Gaussian likelihood.

    The forward model is the manufactured solution
    ``u(x, t) = beta exp(-|x - x0|^2 / alpha) exp(-t)`` read at the sensors
    at ``terminal_time``.  ``calls`` counts density evaluations (one per
    point) and is safe to bump from several threads.
    """

    sensors: np.ndarray
    observations: np.ndarray
    terminal_time: float = 0.03
    source_radius: float = 0.1
    source_strength: float = 1.0
    noise_sigma: float = 0.01
    prior_box: np.ndarray = field(default_factory=lambda: np.array([[0.0, 0.8], [0.0, 0.8]]))
    calls: int = 0

    def __post_init__(self):
        self.sensors = np.atleast_2d(np.asarray(self.sensors, dtype=float))
        self.observations = np.asarray(self.observations, dtype=float).reshape(-1)
        self.prior_box = np.asarray(self.prior_box, dtype=float).reshape(2, 2)
        if len(self.sensors) != len(self.observations):
            raise ValueError("one observation per sensor required")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        self._lock = threading.Lock()

    @property
    def alpha(self) -> float:
        return 2.0 * self.source_radius ** 2

    @property
    def beta(self) -> float:
        return self.source_strength / (2.0 * math.pi * self.source_radius ** 2)

    def simulate(self, x0):
        """Concentration at every sensor for each source location, shape (n, S)."""
        X, _ = _batch(x0, 2)
        r2 = ((X[:, None, :] - self.sensors[None]) ** 2).sum(-1)
        return self.beta * np.exp(-r2 / self.alpha) * math.exp(-self.terminal_time)

    def _count(self, n):
        with self._lock:
            self.calls += int(n)

    def reset_calls(self):
        with self._lock:
            self.calls = 0

    def target(self, name="pde") -> TargetDensity:
        return TargetDensity(name, 2, lambda X: pde_posterior_log_density(self, X), self.prior_box,
                             None, spec=self)


def pde_posterior_log_density(spec: PdePosteriorSpec, x0):
    X, single = _batch(x0, 2)
    spec._count(len(X))
    resid = spec.observations[None] - spec.simulate(X)
    out = -(resid ** 2).sum(axis=1) / (2.0 * spec.noise_sigma ** 2)
    return _unbatch(np.maximum(out, FLOOR), single)


# -- benchmark families -----------------------------------------------------

def gmm2d(a: float) -> GaussianMixtureSpec:
    return GaussianMixtureSpec(
        weights=[0.4, 0.6],
        means=[[6.0, 0.0], [a, 0.0]],
        covs=[np.diag([1.2, 0.5]), np.eye(2)],
    )


def gmm_highdim(a: float, dim: int = 100) -> GaussianMixtureSpec:
    if dim < 4:
        raise ValueError("the high-dimensional mixture needs dim >= 4")
    m1, m2 = np.zeros(dim), np.zeros(dim)
    m1[0], m2[0] = 6.0, a
    d1 = np.ones(dim)
    d1[:4] = [1.2, 0.8, 1.0, 0.5]
    return GaussianMixtureSpec([0.6, 0.4], [m1, m2], [np.diag(d1), np.eye(dim)])


def skew_normal_mixture(dim: int = 20) -> SkewNormalMixtureSpec:
    """Four skewed modes placed on the first three coordinates."""
    if dim < 3:
        raise ValueError("the skew-normal mixture needs dim >= 3")
    heads = [(4, 4, 4), (-4, -4, 4), (-4, 4, -4), (4, -4, -4)]
    skews = [(5, 0), (-2, 1), (5, 0), (5, 5)]
    blocks = [np.array([[1.5, -0.9], [-0.9, 1.5]]), np.eye(2),
              np.array([[1.0, 0.9], [0.9, 1.0]]), np.eye(2)]
    means, alphas, covs = [], [], []
    for head, skew, block in zip(heads, skews, blocks):
        m = np.zeros(dim)
        m[:3] = head
        a = np.zeros(dim)
        a[:2] = skew
        S = np.eye(dim)
        S[:2, :2] = block
        means.append(m)
        alphas.append(a)
        covs.append(S)
    return SkewNormalMixtureSpec([0.35, 0.27, 0.17, 0.21], means, covs, alphas)


def pde_case(case: str, r: float = 0.2, noise_sigma: float = 0.01) -> PdePosteriorSpec:
    """Case "i": two sensors with two consistent sources; case "ii": one sensor, a ring."""
    sensors = {"i": [[0.3, 0.5], [0.6, 0.5]], "ii": [[0.3, 0.5]]}[case]
    spec = PdePosteriorSpec(sensors, np.zeros(len(sensors)), noise_sigma=noise_sigma)
    u = spec.beta * math.exp(-r * r / spec.alpha) * math.exp(-spec.terminal_time)
    spec.observations = np.full(len(sensors), u)
    return spec


def make_target(family: str, **params) -> TargetDensity:
    """Build a target from a family name and keyword parameters."""
    family = family.lower()
    if family == "gmm2d":
        return gmm2d(float(params.get("a", -6.0))).target("gmm2d")
    if family == "gmm":
        dim = int(params.get("dim", 100))
        spec = gmm_highdim(float(params.get("a", -6.0)), dim)
        return spec.target(f"gmm{dim}d")
    if family == "skewnormal":
        dim = int(params.get("dim", 20))
        return skew_normal_mixture(dim).target(f"skewnormal{dim}d")
    if family == "image":
        box = params.get("box")
        spec = ImageDensitySpec.from_pgm(params["path"], box)
        return spec.target("image")
    if family == "pde":
        sigma = float(params.get("noise_sigma", 0.01))
        if "sensors" in params:
            spec = PdePosteriorSpec(params["sensors"], params["observations"], noise_sigma=sigma)
            return spec.target("pde")
        spec = pde_case(str(params.get("case", "ii")), float(params.get("r", 0.2)), sigma)
        return spec.target(f"pde-case-{params.get('case', 'ii')}")
    raise ValueError(f"unknown target family {family!r}")
