import hashlib

import numpy as np
import pytest
from scipy.stats import ks_2samp

from mmdiff import generator as genmod
from mmdiff.cli import (Pipeline, PipelineError, build_target, evaluate, ground_truth_sample,
                        list_presets, load_config, main, read_manifest, run_pipeline)
from mmdiff.samples import SampleSet, read_samples, write_samples
from mmdiff.targets import (GaussianMixtureSpec, SkewNormalMixtureSpec, UnsupportedTargetError,
                            gmm2d, make_target, write_pgm)

TINY_FULL = """
[pipeline]
mode = full
seed = {seed}
n_samples = 500

[target]
family = gmm2d
a = -6

[modefind]
n_starts = 200
step_size = 0.1
n_iters = 300

[langevin]
step_size = 1e-2
n_iters = 200
n_chains = 300

[diffusion]
eps = 1e-3
n_steps = 20
n_labels = 300

[nnet]
hidden = 16,16
epochs = 20
batch_size = 60
lr_halving_period = 10

[bridge]
n_proposal = 500
n_target = 500

[paper_scale]
nnet.epochs = 2000
langevin.n_chains = 10000
"""

TINY_DIRECT = """
[pipeline]
mode = direct-diffusion
n_samples = 200

[target]
family = pde
case = ii
noise_sigma = 0.05

[diffusion]
n_steps = 20
score_points = 1234
n_labels = 100

[nnet]
hidden = 8
epochs = 5
batch_size = 20
"""


def write_cfg(path, text, **fmt):
    path.write_text(text.format(**fmt) if fmt else text)
    return path


def artifact_hashes(out):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(out.iterdir()) if p.name != "manifest.txt"}


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("full")
    cfg = write_cfg(root / "tiny.ini", TINY_FULL, seed=0)
    pipe = run_pipeline(cfg, out=root / "a")
    return root, cfg, pipe


def test_full_run_artifacts(full_run):
    root, _, pipe = full_run
    out = root / "a"
    names = {p.name for p in out.iterdir()}
    for n in ("modes.txt", "svc.json", "langevin_0.csv", "langevin_1.csv", "labels_0.csv",
              "model_1.gen", "train_curve_0.csv", "bridge.csv", "bridge_trace_1.csv",
              "generator.gen", "samples.csv", "manifest.txt"):
        assert n in names
    gen = genmod.load(out / "generator.gen")
    assert gen.n_components == 2 and abs(gen.ratios.sum() - 1) < 1e-12
    assert gen.metadata["config_sha256"] == pipe.cfg.digest()
    assert len(gen.metadata["bridge_traces"]) == 2 and gen.metadata["svc"] is not None
    s = read_samples(out / "samples.csv")
    assert len(s) == 500 and s.provenance == "generator"


def test_manifest_complete(full_run):
    root, _, pipe = full_run
    out = root / "a"
    man = read_manifest(out / "manifest.txt")
    assert man["steps"].split() == list(pipe.steps)
    for step in pipe.steps:
        assert f"time.{step}" in man and f"seed.{step}" in man
        for name in man[f"files.{step}"].split():
            assert man[f"sha256.{name}"] == hashlib.sha256((out / name).read_bytes()).hexdigest()


def test_same_seed_is_byte_identical(full_run):
    root, cfg, _ = full_run
    run_pipeline(cfg, out=root / "b")
    assert artifact_hashes(root / "a") == artifact_hashes(root / "b")


def test_seed_changes_samples(full_run):
    root, cfg, _ = full_run
    run_pipeline(cfg, out=root / "c", seed=1)
    a = read_samples(root / "a" / "samples.csv").points
    c = read_samples(root / "c" / "samples.csv").points
    assert not np.array_equal(a, c)
    assert read_manifest(root / "c" / "manifest.txt")["seed"] == "1"


def test_stepwise_equals_run(full_run):
    root, cfg, pipe = full_run
    out = root / "steps"
    for step in pipe.steps:
        assert main(["step", step, "--config", str(cfg), "--out", str(out)]) == 0
    assert artifact_hashes(out) == artifact_hashes(root / "a")
    assert read_manifest(out / "manifest.txt")["steps"].split() == list(pipe.steps)


def test_resume_from(full_run):
    root, cfg, _ = full_run
    out = root / "resumed"
    c = load_config(cfg)
    c.n_samples = 100
    pipe = Pipeline(c, out, resume_from=root / "a").run()
    # every step before sampling was adopted, not recomputed
    assert (out / "generator.gen").read_bytes() == (root / "a" / "generator.gen").read_bytes()
    assert len(read_samples(out / "samples.csv")) == 100
    old = read_manifest(root / "a" / "manifest.txt")
    assert pipe.times["modefind"] == float(old["time.modefind"])
    assert pipe.times["sample"] != float(old["time.sample"])


def test_resume_recomputes_changed_steps(full_run):
    root, cfg, _ = full_run
    c = load_config(cfg)
    c.nnet["epochs"] = 21
    out = root / "retrain"
    Pipeline(c, out, resume_from=root / "a").run()
    a = root / "a"
    assert (out / "labels_0.csv").read_bytes() == (a / "labels_0.csv").read_bytes()
    assert (out / "model_0.gen").read_bytes() != (a / "model_0.gen").read_bytes()
    man = read_manifest(out / "manifest.txt")
    assert man["digest.labels"] == read_manifest(a / "manifest.txt")["digest.labels"]
    assert man["digest.train"] != read_manifest(a / "manifest.txt")["digest.train"]


def test_step_without_prerequisites(full_run, tmp_path):
    _, cfg, _ = full_run
    with pytest.raises(PipelineError, match="step 'modefind'"):
        Pipeline(load_config(cfg), tmp_path).run("segment")
    assert main(["step", "train", "--config", str(cfg), "--out", str(tmp_path / "t")]) == 1
    with pytest.raises(FileNotFoundError, match="manifest"):
        Pipeline(load_config(cfg), tmp_path / "x", resume_from=tmp_path / "nowhere")


def test_step_failure_names_step_and_keeps_artifacts(full_run, tmp_path):
    _, cfg, _ = full_run
    c = load_config(cfg)
    c.bridge["n_proposal"] = 0
    with pytest.raises(PipelineError, match="step 'bridge'"):
        Pipeline(c, tmp_path).run()
    man = read_manifest(tmp_path / "manifest.txt")
    assert man["steps"].split() == ["modefind", "segment", "langevin", "labels", "train"]
    assert (tmp_path / "model_0.gen").exists()


def test_full_mode_rejects_gradient_free(tmp_path):
    write_pgm(tmp_path / "img.pgm", np.full((4, 4), 9))
    text = TINY_FULL.format(seed=0).replace("family = gmm2d\na = -6", "family = image\npath = img.pgm")
    cfg = write_cfg(tmp_path / "img.ini", text)
    with pytest.raises(UnsupportedTargetError, match="direct-diffusion"):
        run_pipeline(cfg, out=tmp_path / "o")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_direct_mode_counts_density_calls(tmp_path):
    cfg = write_cfg(tmp_path / "pde.ini", TINY_DIRECT)
    pipe = run_pipeline(cfg, out=tmp_path / "o")
    man = read_manifest(tmp_path / "o" / "manifest.txt")
    assert int(man["density_calls"]) == 1234
    assert man["steps"].split() == ["labels", "train", "assemble", "sample"]
    assert len(read_samples(tmp_path / "o" / "samples.csv")) == 200
    assert pipe.state["generator"].n_components == 1


def test_config_loading(full_run, tmp_path):
    _, cfg, _ = full_run
    c = load_config(cfg)
    p = load_config(cfg, paper_scale=True)
    assert c.nnet["epochs"] == 20 and p.nnet["epochs"] == 2000
    assert p.langevin["n_chains"] == 10000 and p.langevin["n_iters"] == 200
    assert c.digest() != p.digest()
    assert load_config(cfg, out="elsewhere").digest() == c.digest()
    bad = write_cfg(tmp_path / "bad.ini", TINY_FULL.format(seed=0).replace("mode = full", "mode = fast"))
    with pytest.raises(ValueError, match="mode"):
        load_config(bad)
    nolang = write_cfg(tmp_path / "nl.ini", TINY_FULL.format(seed=0).replace("[langevin]", "[other]"))
    with pytest.raises(ValueError, match="langevin"):
        load_config(nolang)
    with pytest.raises(FileNotFoundError, match="presets"):
        load_config("no-such-preset")


@pytest.mark.parametrize("name", list_presets())
def test_presets_load(name):
    for scale in (False, True):
        cfg = load_config(name, paper_scale=scale)
        t = build_target(cfg.target)
        if cfg.mode == "full":
            assert t.gradient_available


def test_expected_presets_ship():
    assert {"gmm2d-separated", "gmm2d-weak", "gmm2d-overlap", "gmm100d-separated",
            "skewnormal6d", "skewnormal20d", "image-smiley", "pde-case-i",
            "pde-case-ii"} <= set(list_presets())


def test_evaluate(tmp_path, rng):
    s = SampleSet(rng.normal(size=(400, 3)), 0, "generator")
    a = write_samples(s, tmp_path / "a.csv")
    rows = evaluate(a, a, kl=True, w1=True, sinkhorn_reg=0.5)
    assert [r for r in rows if r[0] == "kl"] and all(v < 1e-12 for m, _, v in rows if m == "kl")
    assert all(v == 0 for m, _, v in rows if m == "w1")
    b = write_samples(SampleSet(rng.normal(size=(10, 2))), tmp_path / "b.csv")
    with pytest.raises(ValueError, match="dimension mismatch"):
        evaluate(a, b)
    with pytest.raises(FileNotFoundError, match="missing.csv"):
        evaluate(a, tmp_path / "missing.csv")
    assert main(["evaluate", str(a), str(a), "--w1", "--out", str(tmp_path / "r.csv")]) == 0
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "metric,dimension,value"
    assert main(["evaluate", str(a), str(tmp_path / "missing.csv")]) == 1


def test_ground_truth():
    s = ground_truth_sample(gmm2d(-6.0).target(), 20000, seed=0)
    assert abs((s.labels == 0).sum() - 8000) <= 208 and s.provenance == "ground_truth"
    g = GaussianMixtureSpec([0.5, 0.5], [[0, 0, 0], [3, 0, 0]], [np.eye(3)] * 2)
    sn = SkewNormalMixtureSpec(g.weights, g.means, g.covs, np.zeros((2, 3)))
    a = ground_truth_sample(g.target(), 5000, 1).points
    b = ground_truth_sample(sn.target(), 5000, 2).points
    for d in range(3):
        assert ks_2samp(a[:, d], b[:, d]).pvalue > 0.01
    with pytest.raises(UnsupportedTargetError):
        ground_truth_sample(make_target("pde"), 10, 0)


def test_main_commands(full_run, tmp_path, capsys):
    root, cfg, _ = full_run
    art = root / "a" / "generator.gen"
    assert main(["sample", "--artifact", str(art), "-n", "50", "--seed", "3",
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert np.array_equal(read_samples(tmp_path / "s.csv").points,
                          genmod.sample(genmod.load(art), 50, 3).points)
    assert main(["ground-truth", "--config", "gmm2d-separated", "-n", "100",
                 "--out", str(tmp_path / "gt.csv")]) == 0
    assert main(["metropolis", "--config", str(cfg), "--chains", "20", "--steps", "10",
                 "--out", str(tmp_path / "mh.csv")]) == 0
    assert read_samples(tmp_path / "mh.csv").provenance == "metropolis"
    assert main(["ground-truth", "--config", "pde-case-ii", "--out", str(tmp_path / "x.csv")]) == 1
    assert main(["sample", "--artifact", str(tmp_path / "nope.gen"), "--out", "x"]) == 1
    capsys.readouterr()
    assert main(["presets"]) == 0
    assert "gmm2d-separated" in capsys.readouterr().out
