"""The assembled mixture generator and its binary artifact.

Artifact layout (all integers and floats little-endian)::

    magic       8 bytes  b"MMDGEN\\r\\n"
    version     u32
    d, K        u32, u32
    eps         f64
    n_steps     u32
    ratios      K x f64
    per component:
        n_layers u32, layer dims (n_layers + 1) x u32,
        then W_1, b_1, ..., W_L, b_L as f64 (W row-major, shape fan_in x fan_out)
    meta_len    u64
    metadata    meta_len bytes of UTF-8 JSON (sorted keys)
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nnet import MlpModel, mlp_forward
from .rng import Stage, blocked_rows
from .samples import SampleSet

MAGIC = b"MMDGEN\r\n"
VERSION = 1
RATIO_TOL = 1e-6
_FORWARD_ROWS = 256


class ArtifactError(ValueError):
    pass


@dataclass(frozen=True)
class AssembledGenerator:
    components: tuple
    ratios: np.ndarray
    eps: float = 1e-3
    n_steps: int = 100
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.components[0].in_dim

    @property
    def n_components(self) -> int:
        return len(self.components)


def assemble(models, ratios, eps=1e-3, n_steps=100, metadata=None) -> AssembledGenerator:
    """Validate and freeze the per-component maps with their mixing ratios.

    Ratios within ``1e-6`` of summing to one are renormalized; anything
    further off is rejected.
    """
    models = tuple(models)
    r = np.asarray(ratios, dtype=float).reshape(-1)
    if not models or len(models) != len(r):
        raise ValueError(f"{len(models)} models but {len(r)} ratios")
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError(f"ratios must be non-negative and finite, got {r}")
    if abs(r.sum() - 1.0) > RATIO_TOL:
        raise ValueError(f"ratios sum to {r.sum()!r}, not 1")
    d = models[0].in_dim
    for k, m in enumerate(models):
        if m.in_dim != d or m.out_dim != d:
            raise ValueError(f"component {k} maps {m.in_dim} -> {m.out_dim}, expected {d} -> {d}")
    r = r / r.sum()
    r.setflags(write=False)
    return AssembledGenerator(models, r, float(eps), int(n_steps), dict(metadata or {}))


def sample(gen: AssembledGenerator, n: int, seed: int, start: int = 0) -> SampleSet:
    """Draw items ``start .. start+n-1`` of the seeded sample sequence.

    Each item uses one uniform (component choice by inverse CDF) and one
    standard-normal ``y``; streams are fixed per index block, so splitting
    ``[0, n)`` into pieces reproduces the same items.
    """
    d = gen.dim
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return SampleSet(np.empty((0, d)), np.empty(0, dtype=np.int64), "generator")
    draws = blocked_rows(seed, Stage.SAMPLE, (), start, start + n,
                         lambda g, m: np.column_stack([g.random(m), g.standard_normal((m, d))]))
    cdf = np.cumsum(gen.ratios)
    lam = np.minimum(np.searchsorted(cdf, draws[:, 0], side="right"), gen.n_components - 1)
    out = np.empty((n, d))
    for k, model in enumerate(gen.components):
        mask = lam == k
        if mask.any():
            out[mask] = _forward_rows(model, draws[mask, 1:])
    return SampleSet(out, lam, "generator")


def _forward_rows(model: MlpModel, Y):
    # Every chunk is padded to the same row count so each row sees the same
    # matrix-product shapes (and hence the same rounding) however [0, n) is split.
    out = np.empty((len(Y), model.out_dim))
    buf = np.zeros((_FORWARD_ROWS, model.in_dim))
    for lo in range(0, len(Y), _FORWARD_ROWS):
        m = min(_FORWARD_ROWS, len(Y) - lo)
        buf[:m] = Y[lo:lo + m]
        buf[m:] = 0.0
        out[lo:lo + m] = mlp_forward(model, buf)[:m]
    return out


def _pack_mlp(model: MlpModel) -> bytes:
    dims = model.layer_dims
    parts = [struct.pack("<I", len(dims) - 1), struct.pack(f"<{len(dims)}I", *dims)]
    for W, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def to_bytes(gen: AssembledGenerator) -> bytes:
    parts = [MAGIC, struct.pack("<IIIdI", VERSION, gen.dim, gen.n_components, gen.eps, gen.n_steps),
             np.asarray(gen.ratios, dtype="<f8").tobytes()]
    parts += [_pack_mlp(m) for m in gen.components]
    meta = json.dumps(gen.metadata, sort_keys=True, separators=(",", ":")).encode()
    parts += [struct.pack("<Q", len(meta)), meta]
    return b"".join(parts)


def save(gen: AssembledGenerator, path) -> Path:
    path = Path(path)
    path.write_bytes(to_bytes(gen))
    return path


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise ArtifactError(f"truncated generator artifact while reading {what} "
                                f"(need {n} bytes at offset {self.pos}, file has {len(self.buf)})")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def floats(self, count, what):
        return np.frombuffer(self.take(8 * count, what), dtype="<f8").astype(float)


def from_bytes(buf: bytes) -> AssembledGenerator:
    rd = _Reader(buf)
    if rd.take(len(MAGIC), "magic") != MAGIC:
        raise ArtifactError("not a generator artifact (bad magic)")
    version, d, K, eps, n_steps = rd.unpack("<IIIdI", "header")
    if version != VERSION:
        raise ArtifactError(f"unsupported generator artifact version {version} (expected {VERSION})")
    ratios = rd.floats(K, "ratios")
    models = []
    for k in range(K):
        (n_layers,) = rd.unpack("<I", f"component {k} layer count")
        dims = rd.unpack(f"<{n_layers + 1}I", f"component {k} layer dims")
        Ws, bs = [], []
        for l in range(n_layers):
            Ws.append(rd.floats(dims[l] * dims[l + 1], f"component {k} weights").reshape(dims[l], dims[l + 1]))
            bs.append(rd.floats(dims[l + 1], f"component {k} biases"))
        models.append(MlpModel(Ws, bs))
    (meta_len,) = rd.unpack("<Q", "metadata length")
    meta = json.loads(rd.take(meta_len, "metadata").decode()) if meta_len else {}
    if rd.pos != len(buf):
        raise ArtifactError(f"{len(buf) - rd.pos} trailing bytes after generator artifact")
    gen = assemble(models, ratios, eps, n_steps, meta)
    if gen.dim != d:
        raise ArtifactError(f"header dimension {d} disagrees with the stored networks ({gen.dim})")
    # keep the stored ratios verbatim so a reload re-saves byte for byte
    ratios.setflags(write=False)
    return AssembledGenerator(gen.components, ratios, gen.eps, gen.n_steps, gen.metadata)


def load(path) -> AssembledGenerator:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"generator artifact not found: {path}")
    return from_bytes(path.read_bytes())
