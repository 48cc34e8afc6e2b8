"""Training-free score-based diffusion with the schedule alpha_t = 1 - t, beta_t^2 = t.

The score of the noised marginal is estimated directly from a weighted
point cloud (no network), and the probability-flow ODE is integrated
backwards with explicit Euler to pair Gaussian draws ``y`` with target
points ``x``.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import Stage, blocked_rows
from .targets import TargetDensity

_CHUNK_ENTRIES = 1 << 18


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiffusionSchedule:
    eps: float = 1e-3
    n_steps: int = 100

    def __post_init__(self):
        if not 0 < self.eps < 0.1:
            raise ValueError("eps must lie in (0, 0.1)")
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")

    def grid(self) -> np.ndarray:
        """Uniform time grid from ``1 - eps`` down to ``eps``."""
        return np.linspace(1.0 - self.eps, self.eps, self.n_steps + 1)


def _coeffs(sched: DiffusionSchedule, t: float):
    if not (sched.eps - 1e-12 <= t <= 1.0 - sched.eps + 1e-12):
        raise ValueError(f"t={t} outside the clipped range [{sched.eps}, {1 - sched.eps}]")
    alpha = 1.0 - t
    beta2 = t
    drift = -1.0 / (1.0 - t)
    sigma2 = 1.0 + 2.0 * t / (1.0 - t)
    return alpha, beta2, drift, sigma2


def schedule_coeffs(sched: DiffusionSchedule, t: float):
    """Return ``(alpha, beta, b, sigma^2)`` at time ``t``.

    ``b = d log alpha / dt = -1/(1-t)`` and
    ``sigma^2 = d beta^2/dt - 2 b beta^2 = 1 + 2t/(1-t)``.
    """
    alpha, beta2, drift, sigma2 = _coeffs(sched, t)
    return alpha, np.sqrt(beta2), drift, sigma2


@dataclass
class ScoreDataset:
    points: np.ndarray
    log_weights: np.ndarray = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(self.points) == 0:
            raise ValueError("score dataset is empty")
        if self.log_weights is None:
            self.log_weights = np.zeros(len(self.points))
        self.log_weights = np.asarray(self.log_weights, dtype=float).reshape(-1)
        if self.log_weights.shape != (len(self.points),):
            raise ValueError("one log-weight per point required")
        if not np.any(np.isfinite(self.log_weights)):
            raise ValueError("every log-weight is -inf")
        self._sqnorm = (self.points ** 2).sum(axis=1)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_uniform(cls, target: TargetDensity, n_points: int, seed: int, box=None):
        """Uniform proposal points over ``box`` weighted by ``log rho``.

        Evaluates the target exactly ``n_points`` times.
        """
        box = target.prior_box if box is None else np.asarray(box, float).reshape(target.dim, 2)
        lo, hi = box[:, 0], box[:, 1]
        pts = blocked_rows(seed, Stage.UNIFORM, (), 0, n_points,
                           lambda g, m: lo + (hi - lo) * g.random((m, target.dim)))
        return cls(pts, target.log_density(pts))


def _affine(data: ScoreDataset, alpha, beta2):
    # log w_m + log q(z | x_m) = z . (alpha/beta2) x_m + bias_m + (a per-row constant)
    scale = data.points.T * (alpha / beta2)
    bias = data.log_weights - (0.5 * alpha * alpha / beta2) * data._sqnorm
    return scale, bias


def _weights_unnormalized(Z, scale, bias):
    out = Z @ scale
    out += bias
    out -= out.max(axis=1, keepdims=True)
    np.exp(out, out=out)
    return out


def score_weights(data: ScoreDataset, z, t, sched: DiffusionSchedule):
    """Normalized weights ``w_m(z)`` of the estimator, shape (n, M)."""
    alpha, beta2, _, _ = _coeffs(sched, t)
    Z = np.atleast_2d(np.asarray(z, dtype=float))
    w = _weights_unnormalized(Z, *_affine(data, alpha, beta2))
    return w / w.sum(axis=1, keepdims=True)


def _score(data, Z, alpha, beta2):
    scale, bias = _affine(data, alpha, beta2)
    # small chunks keep the (rows x M) block in cache
    rows = max(1, _CHUNK_ENTRIES // len(data.points))
    S = np.empty_like(Z)
    for lo in range(0, len(Z), rows):
        zc = Z[lo:lo + rows]
        w = _weights_unnormalized(zc, scale, bias)
        mean = (w @ data.points) / w.sum(axis=1, keepdims=True)
        S[lo:lo + rows] = -(zc - alpha * mean) / beta2
    return S


def mc_score(data: ScoreDataset, z, t, sched: DiffusionSchedule):
    """Monte Carlo score ``sum_m -(z - alpha_t x_m) / beta_t^2 * w_m(z)``."""
    alpha, beta2, _, _ = _coeffs(sched, t)
    z = np.asarray(z, dtype=float)
    S = _score(data, np.atleast_2d(z), alpha, beta2)
    return S[0] if z.ndim == 1 else S


def reverse_ode_solve(data: ScoreDataset, y, sched: DiffusionSchedule, return_path=False):
    """Integrate ``dz = [b z - sigma^2/2 S(z, t)] dt`` from ``t = 1 - eps`` to ``eps``.

    ``y`` (one point or a batch) is the state at ``1 - eps``.  With
    ``return_path`` the states at every grid time are returned as well,
    shape ``(n_steps + 1, ...)``, alongside the grid.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    z = np.atleast_2d(y).copy()
    if not np.all(np.isfinite(z)):
        raise ValueError("terminal state y must be finite")
    ts = sched.grid()
    path = [z.copy()] if return_path else None
    for step in range(sched.n_steps):
        t, h = ts[step], ts[step] - ts[step + 1]
        alpha, beta2, drift, sigma2 = _coeffs(sched, t)
        S = _score(data, z, alpha, beta2)
        z = z - h * (drift * z - 0.5 * sigma2 * S)
        if not np.all(np.isfinite(z)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(z), axis=1))[0])
            raise IntegrationError(f"non-finite state at step {step} (t={t:.6g}) for row {bad}")
        if return_path:
            path.append(z.copy())
    x = z[0] if single else z
    if return_path:
        P = np.stack(path)
        return x, (P[:, 0] if single else P), ts
    return x


@dataclass
class LabeledPairSet:
    y: np.ndarray
    x: np.ndarray
    component: int = 0
    eps: float = 1e-3
    n_steps: int = 100

    def __len__(self):
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.y.shape[1]

    def write_csv(self, path) -> Path:
        path = Path(path)
        d = self.dim
        cols = [f"y{i}" for i in range(d)] + [f"x{i}" for i in range(d)]
        lines = [f"# component={self.component} eps={self.eps!r} n_steps={self.n_steps} dim={d}",
                 ",".join(cols)]
        for yr, xr in zip(self.y, self.x):
            lines.append(",".join(repr(float(v)) for v in np.concatenate([yr, xr])))
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def read_csv(cls, path) -> "LabeledPairSet":
        with Path(path).open() as fh:
            meta = dict(kv.split("=") for kv in fh.readline().lstrip("# ").split())
            fh.readline()
            rows = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
        d = int(meta["dim"])
        rows = rows.reshape(-1, 2 * d)
        return cls(rows[:, :d], rows[:, d:], int(meta["component"]), float(meta["eps"]),
                   int(meta["n_steps"]))


def generate_labels(data: ScoreDataset, n_labels: int, sched: DiffusionSchedule, seed: int,
                    component: int = 0) -> LabeledPairSet:
    """Draw ``n_labels`` standard normal ``y`` and push each through the reverse ODE."""
    d = data.dim
    if n_labels == 0:
        empty = np.empty((0, d))
        return LabeledPairSet(empty, empty.copy(), component, sched.eps, sched.n_steps)
    y = blocked_rows(seed, Stage.LABELS, (component,), 0, n_labels,
                     lambda g, m: g.standard_normal((m, d)))
    x = reverse_ode_solve(data, y, sched)
    return LabeledPairSet(y, x, component, sched.eps, sched.n_steps)
