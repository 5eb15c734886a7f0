"""Symmetric flow matching on toy data: one velocity field for generation and classification."""

from .codec import ClassCodebook, build_codebook, decode, decode_ensemble, dequantize
from .datasets import Dataset, SpiralConfig, gaussian_mixture, split, two_spirals
from .evaluation import accuracy, bayes_classify, mmd_rbf, sweep_steps
from .flow import TrainConfig, VelocityModel, init_model, perturb, target_velocity, train
from .nn import make_rng
from .ode import SolverConfig, classify, generate, integrate

__version__ = "0.1.0"

__all__ = [
    "ClassCodebook", "build_codebook", "decode", "decode_ensemble", "dequantize",
    "Dataset", "SpiralConfig", "gaussian_mixture", "split", "two_spirals",
    "accuracy", "bayes_classify", "mmd_rbf", "sweep_steps",
    "TrainConfig", "VelocityModel", "init_model", "perturb", "target_velocity", "train",
    "make_rng", "SolverConfig", "classify", "generate", "integrate",
]
