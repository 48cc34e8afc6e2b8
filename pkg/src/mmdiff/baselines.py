"""Random-walk Metropolis baseline."""

from dataclasses import dataclass

import numpy as np

from .rng import BLOCK, Stage, block_ranges, stream
from .samples import SampleSet
from .targets import TargetDensity


@dataclass
class MetropolisConfig:
    n_chains: int = 1000
    n_steps: int = 5000
    step_size: float = 0.01
    init_box: np.ndarray = None   # defaults to the target's prior box
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.n_chains < 1 or self.n_steps < 0:
            raise ValueError("n_chains must be positive and n_steps non-negative")


def metropolis_run(target: TargetDensity, cfg: MetropolisConfig, trace: bool = False):
    """Independent random-walk chains started uniformly in ``init_box``.

    Returns the final states as a SampleSet.  With ``trace=True`` the
    states after every step are returned too, shape (n_steps, n_chains, d),
    which is how a single long chain is turned into a sample.
    """
    d = target.dim
    box = target.prior_box if cfg.init_box is None else np.asarray(cfg.init_box, float).reshape(d, 2)
    lo, hi = box[:, 0], box[:, 1]
    out = np.empty((cfg.n_chains, d))
    path = np.empty((cfg.n_steps, cfg.n_chains, d)) if trace else None
    for b, a, z in block_ranges(cfg.n_chains, BLOCK):
        gen = stream(cfg.seed, Stage.METROPOLIS, b)
        m = z - a
        x = lo + (hi - lo) * gen.random((m, d))
        lp = target.log_density(x)
        for step in range(cfg.n_steps):
            prop = x + cfg.step_size * gen.standard_normal((m, d))
            lpp = target.log_density(prop)
            accept = np.log(gen.random(m)) < lpp - lp
            x[accept] = prop[accept]
            lp[accept] = lpp[accept]
            if trace:
                path[step, a:z] = x
        out[a:z] = x
    samples = SampleSet(out, 0, "metropolis")
    return (samples, path) if trace else samples
