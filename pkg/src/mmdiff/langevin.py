"""Unadjusted Langevin sampling of one subdomain, with reject-and-hold walls."""

from dataclasses import dataclass

import numpy as np

from .rng import BLOCK, Stage, block_ranges, stream
from .samples import SampleSet
from .segment import svc_classify
from .targets import TargetDensity, UnsupportedTargetError


@dataclass
class LangevinConfig:
    step_size: float = 1e-3
    n_iters: int = 10000
    n_chains: int = 10000
    init_noise_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.init_noise_scale < 0:
            raise ValueError("init_noise_scale must be non-negative")


def langevin_run(target: TargetDensity, cfg: LangevinConfig, init, region=None,
                 component: int = 0, noise: bool = True) -> SampleSet:
    """Run ``cfg.n_chains`` independent Euler-Maruyama chains and keep their last states.

    ``x <- x + eta * grad log rho(x) + sqrt(2 eta) xi``.  With
    ``region=(svc_model, label)`` any update whose classification differs
    from ``label`` is rejected and the chain holds its position for that
    step.  Chains start at ``init`` plus ``init_noise_scale`` Gaussian noise;
    a perturbed start that leaves the region is pulled back to ``init``.

    ``noise=False`` drops the diffusion term (deterministic gradient flow)
    and exists for diagnostics.
    """
    if not target.gradient_available:
        raise UnsupportedTargetError("Langevin sampling needs an analytic gradient")
    init = np.asarray(init, dtype=float).reshape(target.dim)
    model, label = (None, None) if region is None else region
    if model is not None and svc_classify(model, init)[0] != label:
        raise ValueError("Langevin init point lies outside its region")
    eta = cfg.step_size
    scale = np.sqrt(2.0 * eta) if noise else 0.0
    out = np.empty((cfg.n_chains, target.dim))
    for b, lo, hi in block_ranges(cfg.n_chains, BLOCK):
        gen = stream(cfg.seed, Stage.LANGEVIN, component, b)
        m = hi - lo
        x = init + cfg.init_noise_scale * gen.standard_normal((m, target.dim))
        if model is not None:
            outside = svc_classify(model, x)[0] != label
            x[outside] = init
        for _ in range(cfg.n_iters):
            xi = gen.standard_normal((m, target.dim))
            prop = x + eta * target.grad_log_density(x) + scale * xi
            if model is None:
                x = prop
            else:
                keep = svc_classify(model, prop)[0] == label
                x[keep] = prop[keep]
        out[lo:hi] = x
    return SampleSet(out, component, "langevin")
