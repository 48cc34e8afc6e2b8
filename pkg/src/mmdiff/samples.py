"""Sample containers shared by every stage, and their CSV form.

CSV layout: a one-line header ``dim=<d> component provenance`` followed by
one row per point, ``x_1,...,x_d,<component>,<provenance>``.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROVENANCES = ("langevin", "reverse_ode", "generator", "metropolis", "ground_truth")


@dataclass
class SampleSet:
    points: np.ndarray
    labels: np.ndarray = None
    provenance: str = "langevin"

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.size == 0:
            self.points = self.points.reshape(0, self.points.shape[-1])
        n = self.points.shape[0]
        if self.labels is None:
            self.labels = np.zeros(n, dtype=np.int64)
        elif np.isscalar(self.labels):
            self.labels = np.full(n, int(self.labels), dtype=np.int64)
        else:
            self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (n,):
            raise ValueError("labels must have one entry per point")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def component(self, k: int) -> "SampleSet":
        mask = self.labels == k
        return SampleSet(self.points[mask], self.labels[mask], self.provenance)


def write_samples(samples: SampleSet, path) -> Path:
    path = Path(path)
    lines = [f"dim={samples.dim} component provenance"]
    prov = samples.provenance
    for row, k in zip(samples.points, samples.labels):
        lines.append(",".join(repr(float(v)) for v in row) + f",{int(k)},{prov}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_samples(path) -> SampleSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"sample file not found: {path}")
    with path.open() as fh:
        header = fh.readline().split()
        if not header or not header[0].startswith("dim="):
            raise ValueError(f"{path}: missing 'dim=<d>' header")
        d = int(header[0][4:])
        pts, labels, prov = [], [], None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != d + 2:
                raise ValueError(f"{path}: expected {d + 2} fields, got {len(parts)}")
            pts.append([float(v) for v in parts[:d]])
            labels.append(int(parts[d]))
            prov = parts[d + 1]
    if not pts:
        raise ValueError(f"{path}: no samples")
    return SampleSet(np.array(pts), np.array(labels), prov)
