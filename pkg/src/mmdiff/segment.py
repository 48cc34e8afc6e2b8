"""C-SVC domain segmentation: one-vs-one RBF machines trained by SMO.

Each binary problem solves the soft-margin dual

    min_a  1/2 a^T Q a - e^T a,   0 <= a_i <= C,   y^T a = 0,

with ``Q_ij = y_i y_j k(x_i, x_j)``, updating the maximal KKT-violating
pair each iteration until the violation gap drops below ``tol``.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .rng import Stage, stream

log = logging.getLogger(__name__)

MAX_TRAIN = 5000


def rbf_kernel(A, B, gamma):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def default_gamma(points):
    points = np.atleast_2d(points)
    var = points.var(axis=0).mean()
    return 1.0 / (points.shape[1] * var) if var > 0 else 1.0


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    n_iter: int
    gap: float
    objective: list = field(default_factory=list)


def smo_solve(K, y, C=1.0, tol=1e-3, max_iter=None, record=False) -> SmoResult:
    """Solve the binary C-SVC dual for a precomputed kernel matrix."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    objective = []
    gap = np.inf
    it = 0
    for it in range(max_iter):
        F = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        Fu = np.where(up, F, -np.inf)
        Fl = np.where(low, F, np.inf)
        i, j = int(np.argmax(Fu)), int(np.argmin(Fl))
        gap = Fu[i] - Fl[j]
        if record:
            objective.append(0.5 * alpha @ (1.0 - G))
        if gap < tol:
            break
        eta = max(diag[i] + diag[j] - 2.0 * K[i, j], 1e-12)
        step = gap / eta
        step = min(step, C - alpha[i] if y[i] > 0 else alpha[i])
        step = min(step, alpha[j] if y[j] > 0 else C - alpha[j])
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        # snap to the box to keep the bound tests exact
        for t in (i, j):
            if alpha[t] < 1e-14 * C:
                alpha[t] = 0.0
            elif alpha[t] > C * (1 - 1e-14):
                alpha[t] = C
        G += step * y * (K[:, i] - K[:, j])
    else:
        log.warning("SMO stopped at max_iter=%d with gap %.3g", max_iter, gap)
    # bias from free vectors, else the midpoint of the feasible interval
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = yG[free].mean()
    else:
        at_upper = alpha >= C
        ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb)
    return SmoResult(alpha, -float(rho), it + 1, float(gap), objective)


@dataclass
class BinaryMachine:
    pos: int                 # class voted for when the decision value is >= 0
    neg: int
    sv_pos: np.ndarray       # rows of SvcModel.support_vectors
    dual_coef: np.ndarray    # alpha_i * y_i
    bias: float
    train_alpha: np.ndarray = None   # full dual vector, kept for diagnostics only
    objective: list = None


@dataclass
class SvcModel:
    classes: np.ndarray
    support_vectors: np.ndarray
    machines: list
    gamma: float
    C: float
    tol: float = 1e-3

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def decision_values(self, X):
        """Decision value of every machine, shape (n, n_machines)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Kq = rbf_kernel(X, self.support_vectors, self.gamma)
        return np.stack([Kq[:, m.sv_pos] @ m.dual_coef + m.bias for m in self.machines], axis=1)

    def to_dict(self) -> dict:
        return {
            "classes": [int(c) for c in self.classes],
            "support_vectors": self.support_vectors.tolist(),
            "gamma": self.gamma,
            "C": self.C,
            "tol": self.tol,
            "machines": [
                {"pos": m.pos, "neg": m.neg, "sv_pos": [int(i) for i in m.sv_pos],
                 "dual_coef": m.dual_coef.tolist(), "bias": m.bias}
                for m in self.machines
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "SvcModel":
        machines = [BinaryMachine(m["pos"], m["neg"], np.array(m["sv_pos"], dtype=np.int64),
                                  np.array(m["dual_coef"], dtype=float), float(m["bias"]))
                    for m in d["machines"]]
        return cls(np.array(d["classes"]), np.array(d["support_vectors"], dtype=float),
                   machines, float(d["gamma"]), float(d["C"]), float(d.get("tol", 1e-3)))


def _stratified_subsample(points, labels, cap, seed):
    if len(points) <= cap:
        return points, labels
    rng = stream(seed, Stage.SEGMENT)
    keep = []
    classes, counts = np.unique(labels, return_counts=True)
    quota = np.maximum(1, np.floor(counts * cap / len(points)).astype(int))
    for c, q in zip(classes, quota):
        idx = np.flatnonzero(labels == c)
        keep.append(np.sort(rng.choice(idx, size=min(q, len(idx)), replace=False)))
    keep = np.concatenate(keep)
    return points[keep], labels[keep]


def svc_train(points, labels, C=1.0, gamma=None, tol=1e-3, seed=0, max_train=MAX_TRAIN,
              record_objective=False) -> SvcModel:
    """Train one-vs-one RBF C-SVC machines.

    ``gamma=None`` picks ``1 / (d * mean feature variance)``.  Inputs larger
    than ``max_train`` are subsampled per class.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    lab = np.asarray(labels).astype(np.int64)
    classes = np.unique(lab)
    if len(classes) < 2:
        raise ValueError("C-SVC needs at least two classes; skip segmentation when K == 1")
    X, lab = _stratified_subsample(X, lab, max_train, seed)
    if gamma is None:
        gamma = default_gamma(X)
    K_full = rbf_kernel(X, X, gamma)
    raw = []
    used = set()
    for a, b in combinations(classes, 2):
        idx = np.flatnonzero((lab == a) | (lab == b))
        y = np.where(lab[idx] == a, 1.0, -1.0)
        res = smo_solve(K_full[np.ix_(idx, idx)], y, C, tol, record=record_objective)
        sv = res.alpha > 0
        raw.append((a, b, idx[sv], res.alpha[sv] * y[sv], res.bias, res))
        used.update(idx[sv].tolist())
    pool = np.array(sorted(used), dtype=np.int64)
    where = {int(t): p for p, t in enumerate(pool)}
    machines = []
    for a, b, train_idx, coef, bias, res in raw:
        sv_pos = np.array([where[int(t)] for t in train_idx], dtype=np.int64)
        machines.append(BinaryMachine(int(a), int(b), sv_pos, coef, bias, res.alpha,
                                      res.objective if record_objective else None))
    return SvcModel(classes, X[pool], machines, float(gamma), float(C), float(tol))


def svc_classify(model: SvcModel, x, chunk=4096):
    """One-vs-one vote.

    Returns ``(labels, margins)``.  Vote ties go to the class with the
    largest summed absolute decision value over the machines it won.  The
    margin is the decision value itself for two classes and the vote lead
    of the winner otherwise.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.dim:
        raise ValueError(f"expected points of dimension {model.dim}, got {X.shape[1]}")
    labels = np.empty(len(X), dtype=np.int64)
    margins = np.empty(len(X))
    cls_pos = {int(c): i for i, c in enumerate(model.classes)}
    for lo in range(0, len(X), chunk):
        dec = model.decision_values(X[lo:lo + chunk])
        if len(model.classes) == 2:
            m = model.machines[0]
            labels[lo:lo + chunk] = np.where(dec[:, 0] >= 0, m.pos, m.neg)
            margins[lo:lo + chunk] = dec[:, 0]
            continue
        n = len(dec)
        votes = np.zeros((n, len(model.classes)))
        strength = np.zeros_like(votes)
        for col, m in enumerate(model.machines):
            d = dec[:, col]
            win_pos = d >= 0
            for c, mask in ((m.pos, win_pos), (m.neg, ~win_pos)):
                votes[mask, cls_pos[c]] += 1
                strength[mask, cls_pos[c]] += np.abs(d[mask])
        top = votes.max(axis=1, keepdims=True)
        tied_strength = np.where(votes == top, strength, -np.inf)
        win = np.argmax(tied_strength, axis=1)
        labels[lo:lo + chunk] = model.classes[win]
        ordered = np.sort(votes, axis=1)
        margins[lo:lo + chunk] = ordered[:, -1] - ordered[:, -2]
    if single:
        return int(labels[0]), float(margins[0])
    return labels, margins
