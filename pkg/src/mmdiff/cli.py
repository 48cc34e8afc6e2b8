"""Pipeline driver: INI configs, per-step execution, artifacts and manifest.

Full mode runs modefind -> segment -> langevin -> labels -> train ->
bridge -> assemble -> sample.  Direct-diffusion mode (gradient-free
targets) runs labels -> train -> assemble -> sample, with the score dataset
drawn uniformly over the prior box and weighted by the density.
"""

import argparse
import configparser
import hashlib
import json
import logging
import shutil
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import generator as genmod
from .baselines import MetropolisConfig, metropolis_run
from .bridge import (BridgeConfig, bridge_iterate, fit_proposal, mixing_ratios_log,
                     restricted_log_density)
from .diffusion import DiffusionSchedule, LabeledPairSet, ScoreDataset, generate_labels
from .langevin import LangevinConfig, langevin_run
from .metrics import marginal_kl, sinkhorn, wasserstein_1d
from .modefind import ModeSet, MultiStartConfig, find_modes
from .nnet import TrainConfig, mlp_forward, mlp_init, mlp_train
from .rng import Stage, blocked_rows, stream
from .samples import SampleSet, read_samples, write_samples
from .segment import SvcModel, svc_train
from .targets import TargetDensity, UnsupportedTargetError, make_target

log = logging.getLogger("mmdiff")

PRESET_DIR = Path(__file__).with_name("presets")
MODES = ("full", "direct-diffusion")
FULL_STEPS = ("modefind", "segment", "langevin", "labels", "train", "bridge", "assemble", "sample")
DIRECT_STEPS = ("labels", "train", "assemble", "sample")
ARRAY_KEYS = ("box", "sensors", "observations", "score_box")


class PipelineError(RuntimeError):
    pass


# -- configuration ------------------------------------------------------------

def list_presets() -> list:
    return sorted(p.stem for p in PRESET_DIR.glob("*.ini"))


def resolve_config_path(name) -> Path:
    """A path to an INI file, or the name of a shipped preset."""
    p = Path(name)
    if p.is_file():
        return p
    preset = PRESET_DIR / f"{name}.ini"
    if preset.is_file():
        return preset
    raise FileNotFoundError(f"no config file or preset named {name!r} "
                            f"(presets: {', '.join(list_presets())})")


def _parse_value(text: str):
    s = text.strip()
    if s.lower() in ("true", "yes", "on"):
        return True
    if s.lower() in ("false", "no", "off"):
        return False
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def _parse_array(text) -> list:
    """``"0 0.8; 0 0.8"`` -> ``[[0, 0.8], [0, 0.8]]``."""
    if not isinstance(text, str):
        return text
    rows = [[float(v) for v in row.replace(",", " ").split()] for row in text.split(";")]
    return rows[0] if len(rows) == 1 else rows


@dataclass
class PipelineConfig:
    mode: str = "full"
    seed: int = 0
    out: str = ""
    n_samples: int = 20000
    workers: int = 1
    embed_diagnostics: bool = True
    target: dict = field(default_factory=dict)
    modefind: dict = field(default_factory=dict)
    segment: dict = field(default_factory=dict)
    langevin: dict = field(default_factory=dict)
    diffusion: dict = field(default_factory=dict)
    nnet: dict = field(default_factory=dict)
    bridge: dict = field(default_factory=dict)
    source: str = ""

    def digest(self) -> str:
        """SHA-256 of everything that affects results (not ``out`` or ``source``)."""
        d = asdict(self)
        d.pop("out")
        d.pop("source")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def step_digest(self, step: str) -> str:
        """Digest of the settings that ``step`` and every step before it depend on."""
        steps = FULL_STEPS if self.mode == "full" else DIRECT_STEPS
        keys = ["mode", "seed", "target"]
        for s in steps[:steps.index(step) + 1]:
            keys += STEP_KEYS[s]
        d = asdict(self)
        return hashlib.sha256(json.dumps({k: d[k] for k in keys}, sort_keys=True).encode()).hexdigest()


# config fields each step reads
STEP_KEYS = {"modefind": ["modefind"], "segment": ["segment"], "langevin": ["langevin"],
             "labels": ["diffusion"], "train": ["nnet"], "bridge": ["bridge"],
             "assemble": ["embed_diagnostics"], "sample": ["n_samples"]}

BLOCKS = ("target", "modefind", "segment", "langevin", "diffusion", "nnet", "bridge")


def load_config(path, paper_scale=False, seed=None, out=None) -> PipelineConfig:
    path = resolve_config_path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    cp.read(path)
    sections = {s: {k: _parse_value(v) for k, v in cp[s].items()} for s in cp.sections()}
    if paper_scale:
        for key, val in sections.get("paper_scale", {}).items():
            sec, _, name = key.partition(".")
            if not name:
                raise ValueError(f"{path}: paper_scale override {key!r} must be <section>.<key>")
            sections.setdefault(sec, {})[name] = val
    pipe = sections.get("pipeline", {})
    cfg = PipelineConfig(
        mode=str(pipe.get("mode", "full")),
        seed=int(pipe.get("seed", 0)),
        out=str(pipe.get("out", f"runs/{path.stem}")),
        n_samples=int(pipe.get("n_samples", 20000)),
        workers=int(pipe.get("workers", 1)),
        embed_diagnostics=bool(pipe.get("embed_diagnostics", True)),
        source=str(path),
        **{b: dict(sections.get(b, {})) for b in BLOCKS},
    )
    if seed is not None:
        cfg.seed = int(seed)
    if out is not None:
        cfg.out = str(out)
    if cfg.mode not in MODES:
        raise ValueError(f"{path}: mode must be one of {MODES}, got {cfg.mode!r}")
    need = ("modefind", "langevin", "diffusion", "nnet", "bridge") if cfg.mode == "full" \
        else ("diffusion", "nnet")
    missing = [b for b in ("target",) + need if b not in sections]
    if missing:
        raise ValueError(f"{path}: missing section(s) {missing} for mode {cfg.mode}")
    # relative image paths are relative to the config file
    if "path" in cfg.target and not Path(cfg.target["path"]).is_absolute():
        cfg.target["path"] = str((path.parent / cfg.target["path"]).resolve())
    return cfg


def build_target(spec: dict) -> TargetDensity:
    params = {k: (_parse_array(v) if k in ARRAY_KEYS else v) for k, v in spec.items()}
    family = params.pop("family")
    return make_target(family, **params)


# -- pipeline -------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


class Pipeline:
    """One run of the pipeline writing into ``out``.

    Each ``step_<name>`` writes its artifacts; each ``load_<name>`` reads them
    back, so any step can run on its own once earlier artifacts exist in
    ``out`` (or in ``resume_from``).
    """

    def __init__(self, cfg: PipelineConfig, out=None, resume_from=None):
        self.cfg = cfg
        self.out = Path(out or cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.target = build_target(cfg.target)
        if cfg.mode == "full" and not self.target.gradient_available:
            raise UnsupportedTargetError(
                f"target {self.target.name!r} has no analytic gradient, so mode=full is "
                "unsupported; use mode = direct-diffusion")
        self.resume = Path(resume_from) if resume_from else None
        self.resume_manifest = {}
        if self.resume is not None:
            mpath = self.resume / "manifest.txt"
            if not mpath.exists():
                raise FileNotFoundError(f"no manifest to resume from: {mpath}")
            self.resume_manifest = read_manifest(mpath)
            if self.resume_manifest.get("config_sha256") != cfg.digest():
                log.info("resuming from a run with different settings; changed steps rerun")
        self.steps = FULL_STEPS if cfg.mode == "full" else DIRECT_STEPS
        self.state = {}
        self.files = {}
        self.times = {}
        self.extra = {}
        self.digests = {}
        self.done = []
        prev = self.out / "manifest.txt"
        if prev.exists() and self.resume is None:
            # keep the record of steps already completed in this directory
            old = read_manifest(prev)
            keep = [s for s in old.get("steps", "").split()
                    if s in self.steps and old.get(f"digest.{s}") == cfg.step_digest(s)]
            self._absorb_manifest(old, keep)

    # bookkeeping

    def _absorb_manifest(self, man, steps):
        for s in steps:
            if s not in self.done:
                self.done.append(s)
            self.files[s] = man.get(f"files.{s}", "").split()
            if f"digest.{s}" in man:
                self.digests[s] = man[f"digest.{s}"]
            if f"time.{s}" in man:
                self.times[s] = float(man[f"time.{s}"])
        if "density_calls" in man:
            self.extra["density_calls"] = int(man["density_calls"])

    def _write(self, step, name, writer):
        path = self.out / name
        writer(path)
        self.files.setdefault(step, [])
        if name not in self.files[step]:
            self.files[step].append(name)
        return path

    def write_manifest(self):
        lines = ["# mmdiff run manifest",
                 f"config = {self.cfg.source}",
                 f"config_sha256 = {self.cfg.digest()}",
                 f"mode = {self.cfg.mode}",
                 f"target = {self.target.name}",
                 f"seed = {self.cfg.seed}",
                 "rng = philox streams keyed by (seed, stage, key..., block)"]
        for s in self.steps:
            lines.append(f"seed.{s} = {self.cfg.seed}")
        for k, v in sorted(self.extra.items()):
            lines.append(f"{k} = {v}")
        ordered = [s for s in self.steps if s in self.done]
        lines.append("steps = " + " ".join(ordered))
        for s in ordered:
            lines.append(f"digest.{s} = {self.digests.get(s, self.cfg.step_digest(s))}")
            if s in self.times:
                lines.append(f"time.{s} = {self.times[s]:.3f}")
            lines.append(f"files.{s} = " + " ".join(self.files.get(s, [])))
        for s in ordered:
            for name in self.files.get(s, []):
                lines.append(f"sha256.{name} = {_sha256(self.out / name)}")
        (self.out / "manifest.txt").write_text("\n".join(lines) + "\n")

    def _map(self, fn, items):
        items = list(items)
        if self.cfg.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(self.cfg.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(i) for i in items]

    # driver

    def run(self, only=None):
        names = self.steps if only is None else [only]
        for name in names:
            if name not in self.steps:
                raise ValueError(f"step {name!r} is not part of mode {self.cfg.mode} "
                                 f"(steps: {' '.join(self.steps)})")
            if only is None and self._adopt(name):
                continue
            t0 = time.perf_counter()
            log.info("step %s", name)
            try:
                getattr(self, f"step_{name}")()
            except Exception as exc:
                self.write_manifest()
                raise PipelineError(f"step '{name}' failed: {exc}") from exc
            self.times[name] = time.perf_counter() - t0
            self.digests[name] = self.cfg.step_digest(name)
            if name not in self.done:
                self.done.append(name)
            self.write_manifest()
        return self

    def _adopt(self, name) -> bool:
        """Take a completed step's artifacts from the resume directory.

        Only steps whose settings (and those of every earlier step) match the
        current config are adopted.
        """
        if self.resume is None:
            return False
        if name not in self.resume_manifest.get("steps", "").split():
            return False
        if self.resume_manifest.get(f"digest.{name}") != self.cfg.step_digest(name):
            log.info("step %s: settings changed since %s, recomputing", name, self.resume)
            return False
        for fname in self.resume_manifest.get(f"files.{name}", "").split():
            src, dst = self.resume / fname, self.out / fname
            if not src.exists():
                raise FileNotFoundError(f"resume artifact missing: {src}")
            if src.resolve() != dst.resolve():
                shutil.copyfile(src, dst)
        self._absorb_manifest(self.resume_manifest, [name])
        log.info("step %s resumed from %s", name, self.resume)
        return True

    def _get(self, key, step):
        if key not in self.state:
            if step not in self.done and not self._adopt(step):
                raise PipelineError(f"needs the artifacts of step '{step}', which has not run "
                                    f"in {self.out}; run it first or pass --resume-from")
            getattr(self, f"load_{step}")()
        return self.state[key]

    @property
    def n_components(self) -> int:
        return self._get("modes", "modefind").n_modes if self.cfg.mode == "full" else 1

    def _sched(self):
        d = self.cfg.diffusion
        return DiffusionSchedule(float(d.get("eps", 1e-3)), int(d.get("n_steps", 100)))

    # step 1

    def step_modefind(self):
        kw = {k: v for k, v in self.cfg.modefind.items() if k != "seed"}
        ms = find_modes(self.target, MultiStartConfig(**kw, seed=self.cfg.seed))
        log.info("found %d modes", ms.n_modes)
        self.state["modes"] = ms
        self._write("modefind", "modes.txt", lambda p: p.write_text(ms.to_text()))

    def load_modefind(self):
        self.state["modes"] = ModeSet.from_text((self.out / "modes.txt").read_text())

    # step 2

    def step_segment(self):
        ms = self._get("modes", "modefind")
        svc = None
        if ms.n_modes > 1:
            s = self.cfg.segment
            svc = svc_train(ms.start_points, ms.assignments, C=float(s.get("C", 1.0)),
                            gamma=s.get("gamma"), tol=float(s.get("tol", 1e-3)), seed=self.cfg.seed,
                            max_train=int(s.get("max_train", 5000)))
        self.state["svc"] = svc
        body = json.dumps(svc.to_dict() if svc else None, sort_keys=True)
        self._write("segment", "svc.json", lambda p: p.write_text(body + "\n"))

    def load_segment(self):
        d = json.loads((self.out / "svc.json").read_text())
        self.state["svc"] = SvcModel.from_dict(d) if d else None

    # step 3a: Langevin sampling per component

    def step_langevin(self):
        ms = self._get("modes", "modefind")
        svc = self._get("svc", "segment")
        kw = {k: v for k, v in self.cfg.langevin.items() if k != "seed"}
        lcfg = LangevinConfig(**kw, seed=self.cfg.seed)

        def one(k):
            region = (svc, k) if svc is not None else None
            return langevin_run(self.target, lcfg, ms.peaks[k], region, component=k)

        sets = self._map(one, range(ms.n_modes))
        self.state["langevin"] = sets
        for k, s in enumerate(sets):
            self._write("langevin", f"langevin_{k}.csv", lambda p, s=s: write_samples(s, p))

    def load_langevin(self):
        self.state["langevin"] = [read_samples(self.out / f"langevin_{k}.csv")
                                  for k in range(self.n_components)]

    # step 3b: diffusion labels

    def step_labels(self):
        d = self.cfg.diffusion
        sched = self._sched()
        n_labels = int(d.get("n_labels", 10000))
        if self.cfg.mode == "full":
            datasets = [ScoreDataset(s.points) for s in self._get("langevin", "langevin")]
        else:
            spec = self.target.spec
            if hasattr(spec, "reset_calls"):
                spec.reset_calls()
            box = _parse_array(d["score_box"]) if "score_box" in d else None
            data = ScoreDataset.from_uniform(self.target, int(d.get("score_points", 20000)),
                                             self.cfg.seed, box)
            if hasattr(spec, "calls"):
                self.extra["density_calls"] = spec.calls
            datasets = [data]
            rows = np.column_stack([data.points, data.log_weights])
            self._write("labels", "score_points.csv", lambda p: np.savetxt(
                p, rows, delimiter=",", fmt="%.17g",
                header=",".join([f"x{i}" for i in range(data.dim)] + ["log_weight"])))

        pairs = self._map(lambda k: generate_labels(datasets[k], n_labels, sched, self.cfg.seed, k),
                          range(len(datasets)))
        self.state["labels"] = pairs
        for k, p in enumerate(pairs):
            self._write("labels", f"labels_{k}.csv", p.write_csv)

    def load_labels(self):
        self.state["labels"] = [LabeledPairSet.read_csv(self.out / f"labels_{k}.csv")
                                for k in range(self.n_components)]

    # step 4

    def _train_config(self):
        kw = {k: v for k, v in self.cfg.nnet.items() if k not in ("hidden", "seed")}
        return TrainConfig(**kw, seed=self.cfg.seed)

    def step_train(self):
        pairs = self._get("labels", "labels")
        hidden = [int(h) for h in str(self.cfg.nnet.get("hidden", "1000,1000,1000")).split(",")]
        tcfg = self._train_config()
        sched = self._sched()

        def one(k):
            d = pairs[k].dim
            model = mlp_init([d] + hidden + [d], self.cfg.seed, component=k)
            return mlp_train(model, pairs[k], tcfg, log_every=max(1, tcfg.epochs // 10))

        results = self._map(one, range(len(pairs)))
        self.state["models"] = [m for m, _ in results]
        for k, (model, report) in enumerate(results):
            single = genmod.assemble([model], [1.0], sched.eps, sched.n_steps)
            self._write("train", f"model_{k}.gen", lambda p, g=single: genmod.save(g, p))
            self._write("train", f"train_curve_{k}.csv", report.write_csv)

    def load_train(self):
        self.state["models"] = [genmod.load(self.out / f"model_{k}.gen").components[0]
                                for k in range(self.n_components)]

    # step 5

    def step_bridge(self):
        models = self._get("models", "train")
        K = len(models)
        b = dict(self.cfg.bridge)
        use_langevin = bool(b.pop("use_langevin", False))
        b.pop("seed", None)
        bcfg = BridgeConfig(**b, seed=self.cfg.seed)
        svc = self._get("svc", "segment") if K > 1 else None
        if K == 1:
            log_lam, traces = [0.0], [[0.0]]
            conv, iters = [True], [0]
        else:
            def one(k):
                if use_langevin:
                    X = self._get("langevin", "langevin")[k].points
                else:
                    d = models[k].in_dim
                    y = blocked_rows(self.cfg.seed, Stage.BRIDGE, (k, 1), 0, bcfg.n_target,
                                     lambda g, m: g.standard_normal((m, d)))
                    X = mlp_forward(models[k], y)
                prop = fit_proposal(X, bcfg.covariance_ridge)
                return bridge_iterate(restricted_log_density(self.target, svc, k), X, prop, bcfg, k)

            ests = self._map(one, range(K))
            log_lam = [e.log_ratio for e in ests]
            traces = [e.iterates for e in ests]
            conv = [e.converged for e in ests]
            iters = [e.n_iterations for e in ests]
        ratios = mixing_ratios_log(log_lam)
        self.state["ratios"] = ratios
        self.state["bridge_traces"] = traces
        rows = ["component,log_lambda,ratio,iterations,converged"]
        rows += [f"{k},{float(log_lam[k])!r},{float(ratios[k])!r},{iters[k]},{int(conv[k])}" for k in range(K)]
        self._write("bridge", "bridge.csv", lambda p: p.write_text("\n".join(rows) + "\n"))
        for k, tr in enumerate(traces):
            body = "iteration,log_lambda\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(tr))
            self._write("bridge", f"bridge_trace_{k}.csv", lambda p, body=body: p.write_text(body))

    def load_bridge(self):
        lines = (self.out / "bridge.csv").read_text().splitlines()[1:]
        self.state["ratios"] = np.array([float(l.split(",")[2]) for l in lines])
        traces = []
        for k in range(len(lines)):
            rows = (self.out / f"bridge_trace_{k}.csv").read_text().splitlines()[1:]
            traces.append([float(r.split(",")[1]) for r in rows])
        self.state["bridge_traces"] = traces

    # step 6

    def step_assemble(self):
        models = self._get("models", "train")
        ratios = self._get("ratios", "bridge") if self.cfg.mode == "full" else [1.0]
        sched = self._sched()
        meta = {"seed": self.cfg.seed, "config_sha256": self.cfg.digest(),
                "target": self.target.name, "mode": self.cfg.mode}
        if self.cfg.embed_diagnostics and self.cfg.mode == "full":
            svc = self._get("svc", "segment")
            meta["svc"] = svc.to_dict() if svc is not None else None
            meta["bridge_traces"] = self._get("bridge_traces", "bridge")
            meta["peaks"] = self._get("modes", "modefind").peaks.tolist()
        gen = genmod.assemble(models, ratios, sched.eps, sched.n_steps, meta)
        self.state["generator"] = gen
        self._write("assemble", "generator.gen", lambda p: genmod.save(gen, p))

    def load_assemble(self):
        self.state["generator"] = genmod.load(self.out / "generator.gen")

    def step_sample(self):
        gen = self._get("generator", "assemble")
        s = genmod.sample(gen, self.cfg.n_samples, self.cfg.seed)
        self.state["samples"] = s
        self._write("sample", "samples.csv", lambda p: write_samples(s, p))

    def load_sample(self):
        self.state["samples"] = read_samples(self.out / "samples.csv")


def run_pipeline(config, out=None, seed=None, paper_scale=False, resume_from=None, only=None):
    cfg = config if isinstance(config, PipelineConfig) else \
        load_config(config, paper_scale=paper_scale, seed=seed)
    if seed is not None:
        cfg.seed = int(seed)
    return Pipeline(cfg, out, resume_from).run(only)


# -- evaluation and reference samples ---------------------------------------------

def evaluate(a_path, b_path, kl=True, w1=False, sinkhorn_reg=None, seed=0) -> list:
    """Rows ``(metric, dimension, value)``; dimension -1 marks joint metrics."""
    a, b = read_samples(a_path), read_samples(b_path)
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a_path} has {a.dim}, {b_path} has {b.dim}")
    rows = []
    if kl:
        rows += [("kl", j, marginal_kl(a, b, j)) for j in range(a.dim)]
    if w1:
        rows += [("w1", j, wasserstein_1d(a.points[:, j], b.points[:, j])) for j in range(a.dim)]
    if sinkhorn_reg is not None:
        res = sinkhorn(a, b, float(sinkhorn_reg), seed=seed)
        if not res.converged:
            log.warning("Sinkhorn did not converge (marginal error %.3g)", res.marginal_error)
        rows.append(("sinkhorn", -1, res.cost))
    return rows


def write_report(rows, path):
    text = "metric,dimension,value\n" + "".join(f"{m},{j},{v!r}\n" for m, j, v in rows)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def ground_truth_sample(target: TargetDensity, n: int, seed: int) -> SampleSet:
    spec = target.spec
    if not hasattr(spec, "sample"):
        raise UnsupportedTargetError(f"target {target.name!r} has no direct sampler")
    x, labels = spec.sample(n, stream(seed, Stage.GROUND_TRUTH))
    return SampleSet(x, labels, "ground_truth")


# -- command line -------------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="mmdiff", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def pipeline_args(sp):
        sp.add_argument("--config", required=True, help="INI file or preset name")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--paper-scale", action="store_true")
        sp.add_argument("--resume-from")

    pipeline_args(sub.add_parser("run", help="run every step of the configured mode"))
    st = sub.add_parser("step", help="run a single step using artifacts already in --out")
    st.add_argument("name", choices=FULL_STEPS)
    pipeline_args(st)

    sa = sub.add_parser("sample", help="draw from a saved generator")
    sa.add_argument("--artifact", required=True)
    sa.add_argument("-n", "--n", type=int, default=20000)
    sa.add_argument("--seed", type=int, default=0)
    sa.add_argument("--out", required=True)

    ev = sub.add_parser("evaluate", help="compare two sample CSVs")
    ev.add_argument("a")
    ev.add_argument("b")
    ev.add_argument("--kl", action="store_true")
    ev.add_argument("--w1", action="store_true")
    ev.add_argument("--sinkhorn", type=float, metavar="REG")
    ev.add_argument("--out")

    gt = sub.add_parser("ground-truth", help="exact samples of an analytic target")
    gt.add_argument("--config", required=True)
    gt.add_argument("-n", "--n", type=int, default=20000)
    gt.add_argument("--seed", type=int, default=0)
    gt.add_argument("--out", required=True)

    mh = sub.add_parser("metropolis", help="random-walk Metropolis baseline")
    mh.add_argument("--config", required=True)
    mh.add_argument("--chains", type=int, default=1000)
    mh.add_argument("--steps", type=int, default=5000)
    mh.add_argument("--step-size", type=float, default=0.01)
    mh.add_argument("--seed", type=int, default=0)
    mh.add_argument("--out", required=True)

    sub.add_parser("presets", help="list shipped presets")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("run", "step"):
            cfg = load_config(args.config, args.paper_scale, args.seed, args.out)
            only = args.name if args.command == "step" else None
            pipe = Pipeline(cfg, cfg.out, args.resume_from).run(only)
            print(pipe.out / "manifest.txt")
        elif args.command == "sample":
            gen = genmod.load(args.artifact)
            write_samples(genmod.sample(gen, args.n, args.seed), args.out)
        elif args.command == "evaluate":
            kl = args.kl or not (args.w1 or args.sinkhorn is not None)
            write_report(evaluate(args.a, args.b, kl, args.w1, args.sinkhorn), args.out)
        elif args.command == "ground-truth":
            target = build_target(load_config(args.config).target)
            write_samples(ground_truth_sample(target, args.n, args.seed), args.out)
        elif args.command == "metropolis":
            target = build_target(load_config(args.config).target)
            mcfg = MetropolisConfig(args.chains, args.steps, args.step_size, seed=args.seed)
            write_samples(metropolis_run(target, mcfg), args.out)
        elif args.command == "presets":
            print("\n".join(list_presets()))
    except (PipelineError, UnsupportedTargetError, FileNotFoundError, ValueError) as exc:
        print(f"mmdiff: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
