"""Divide-and-conquer diffusion sampling of multimodal densities.

Find the modes of an unnormalized density, carve the domain into one
region per mode, sample each region with Langevin dynamics, turn the
samples into (Gaussian draw, target point) pairs with a training-free
diffusion model, fit one network per region, weight the regions by
bridge sampling and assemble a mixture generator.
"""

from .targets import TargetDensity, make_target
from .samples import SampleSet, read_samples, write_samples
from .generator import AssembledGenerator, assemble, load, sample, save

__version__ = "0.1.0"
