"""Multi-start fixed-step gradient descent on the energy ``-log rho``."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .rng import Stage, block_ranges, blocked_rows
from .targets import TargetDensity, UnsupportedTargetError

log = logging.getLogger(__name__)


@dataclass
class MultiStartConfig:
    n_starts: int = 2000
    step_size: float = 0.1
    n_iters: int = 2000
    dedup_radius: float = 0.5
    seed: int = 0
    prior_box: np.ndarray = None

    def __post_init__(self):
        if self.step_size <= 0 or self.dedup_radius <= 0:
            raise ValueError("step_size and dedup_radius must be positive")
        if self.n_starts < 1 or self.n_iters < 1:
            raise ValueError("n_starts and n_iters must be positive")


@dataclass
class ModeSet:
    peaks: np.ndarray          # (K, d)
    energies: np.ndarray       # (K,)
    start_points: np.ndarray   # (N, d)
    assignments: np.ndarray    # (N,) in 0..K-1
    n_failed: int = 0

    @property
    def n_modes(self) -> int:
        return len(self.peaks)

    def to_text(self) -> str:
        lines = [f"n_modes = {self.n_modes}", f"n_starts = {len(self.start_points)}",
                 f"n_failed = {self.n_failed}"]
        for k, (p, e) in enumerate(zip(self.peaks, self.energies)):
            lines.append(f"peak {k} energy={float(e)!r} x=" + " ".join(repr(float(v)) for v in p))
        for s, a in zip(self.start_points, self.assignments):
            lines.append(f"start {int(a)} " + " ".join(repr(float(v)) for v in s))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModeSet":
        peaks, energies, starts, labels, failed = [], [], [], [], 0
        for line in text.splitlines():
            if line.startswith("n_failed"):
                failed = int(line.split("=")[1])
            elif line.startswith("peak "):
                head, xs = line.split(" x=")
                energies.append(float(head.split("energy=")[1]))
                peaks.append([float(v) for v in xs.split()])
            elif line.startswith("start "):
                parts = line.split()
                labels.append(int(parts[1]))
                starts.append([float(v) for v in parts[2:]])
        return cls(np.array(peaks), np.array(energies), np.array(starts),
                   np.array(labels, dtype=np.int64), failed)


def multi_start_descent(target: TargetDensity, cfg: MultiStartConfig):
    """Run ``x <- x - lambda * grad E(x)`` from uniform starts in the prior box.

    Returns ``(terminal_points, start_points)``.  Runs whose iterate goes
    non-finite keep NaN terminal points; :func:`dedup_optima` drops them.
    """
    if not target.gradient_available:
        raise UnsupportedTargetError("multi-start descent needs an analytic gradient")
    box = target.prior_box if cfg.prior_box is None else np.asarray(cfg.prior_box, float).reshape(target.dim, 2)
    lo, hi = box[:, 0], box[:, 1]
    starts = blocked_rows(cfg.seed, Stage.MODEFIND, (), 0, cfg.n_starts,
                          lambda g, m: lo + (hi - lo) * g.random((m, target.dim)))
    finals = np.empty_like(starts)
    for _, a, b in block_ranges(cfg.n_starts):
        x = starts[a:b].copy()
        with np.errstate(invalid="ignore", over="ignore"):
            for _ in range(cfg.n_iters):
                x += cfg.step_size * target.grad_log_density(x)
        finals[a:b] = x
    return finals, starts


def _single_linkage(points, radius):
    n = len(points)
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    return comp


def dedup_optima(raw_optima, start_points, radius, energy=None) -> ModeSet:
    """Cluster terminal points into distinct peaks.

    Points are visited in ascending energy; a point joins any cluster that
    already has a member within ``radius`` (clusters it bridges are merged),
    otherwise it founds a new one.  This is single linkage at ``radius``, so
    evenly spaced points chain into one cluster.  Each cluster is
    represented by its lowest-energy member and peaks are numbered in
    ascending energy.

    ``energy`` maps points to energies; without it all points tie and
    input order decides.
    """
    raw = np.asarray(raw_optima, dtype=float)
    starts = np.asarray(start_points, dtype=float)
    if len(raw) == 0:
        raise ValueError("no optima to deduplicate")
    finite = np.all(np.isfinite(raw), axis=1)
    n_failed = int((~finite).sum())
    if n_failed:
        log.warning("%d descent runs went non-finite and were dropped", n_failed)
    raw, starts = raw[finite], starts[finite]
    if len(raw) == 0:
        raise ValueError("every descent run diverged")
    e = np.zeros(len(raw)) if energy is None else np.asarray(energy(raw), dtype=float)
    order = np.argsort(e, kind="stable")
    comp = _single_linkage(raw, radius)
    # relabel components by the rank of their best member
    labels = np.full(len(raw), -1, dtype=np.int64)
    peaks, energies, mapping = [], [], {}
    for idx in order:
        c = comp[idx]
        if c not in mapping:
            mapping[c] = len(peaks)
            peaks.append(raw[idx])
            energies.append(e[idx])
        labels[idx] = mapping[c]
    return ModeSet(np.array(peaks), np.array(energies), starts, labels, n_failed)


def find_modes(target: TargetDensity, cfg: MultiStartConfig) -> ModeSet:
    finals, starts = multi_start_descent(target, cfg)
    return dedup_optima(finals, starts, cfg.dedup_radius, energy=target.energy)
