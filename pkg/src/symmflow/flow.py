"""Symmetric flow-matching objective and training loop.

Data ``x`` flows from noise (t=0) to data (t=1) while the label code ``y``
flows from its code (t=0) to noise (t=1), both along straight paths. One
network predicts both velocities from ``[x_t, y_t, time_features(t)]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .codec import ClassCodebook, dequantize
from .nn import AdamState, MlpParams, adam_step, make_rng, mlp_backward, mlp_forward, mlp_init

log = logging.getLogger(__name__)

OBJECTIVES = ("symmetric", "conditional")
TIME_ENCODINGS = ("raw", "sinusoidal")
N_FREQ = 4


class CoupledState(NamedTuple):
    x: np.ndarray  # (n, dim_x)
    y: np.ndarray  # (n, dim_y)
    t: np.ndarray | float


class NoiseDraws(NamedTuple):
    t: np.ndarray  # (n,)
    xi_x: np.ndarray
    xi_y: np.ndarray


def time_features(t, n: int, encoding: str = "raw") -> np.ndarray:
    """``(n, width)`` time block appended to the network input."""
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    if encoding == "raw":
        return t[:, None].copy()
    if encoding == "sinusoidal":
        freqs = np.pi * 2.0 ** np.arange(N_FREQ)
        ang = t[:, None] * freqs
        return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
    raise ValueError(f"unknown time encoding {encoding!r}")


def time_width(encoding: str) -> int:
    return {"raw": 1, "sinusoidal": 2 * N_FREQ}[encoding]


def _pair_shapes(a, b, what):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape {a.shape} does not match noise shape {b.shape}")


def _col(t, like):
    t = np.asarray(t, dtype=np.float64)
    return t[..., None] if t.ndim == like.ndim - 1 and like.ndim > 1 else t


def perturb(x, y, t, xi_x, xi_y) -> CoupledState:
    """Straight-line interpolation: x from noise to data, y from code to noise."""
    x, y, xi_x, xi_y = (np.asarray(a, dtype=np.float64) for a in (x, y, xi_x, xi_y))
    _pair_shapes(x, xi_x, "x")
    _pair_shapes(y, xi_y, "y")
    if np.any((np.asarray(t) < 0) | (np.asarray(t) > 1)):
        raise ValueError("t must lie in [0, 1]")
    tx, ty = _col(t, x), _col(t, y)
    return CoupledState((1 - tx) * xi_x + tx * x, (1 - ty) * y + ty * xi_y, t)


def target_velocity(x, y, xi_x, xi_y) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative of the ``perturb`` path: (x - xi_x, xi_y - y)."""
    x, y, xi_x, xi_y = (np.asarray(a, dtype=np.float64) for a in (x, y, xi_x, xi_y))
    _pair_shapes(x, xi_x, "x")
    _pair_shapes(y, xi_y, "y")
    return x - xi_x, xi_y - y


@dataclass
class VelocityModel:
    """An MLP plus the layout needed to read it as a coupled velocity field."""

    params: MlpParams
    dim_x: int
    dim_y: int
    time_encoding: str = "raw"

    def __post_init__(self):
        want_in = self.dim_x + self.dim_y + time_width(self.time_encoding)
        want_out = self.dim_x + self.dim_y
        if self.params.widths[0] != want_in or self.params.widths[-1] != want_out:
            raise ValueError(
                f"network widths {self.params.widths[0]}->{self.params.widths[-1]} do not fit "
                f"dim_x={self.dim_x}, dim_y={self.dim_y}, time={self.time_encoding} "
                f"(need {want_in}->{want_out})"
            )

    def inputs(self, x, y, t) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.concatenate([x, np.atleast_2d(y), time_features(t, len(x), self.time_encoding)], axis=1)

    def __call__(self, x, y, t) -> tuple[np.ndarray, np.ndarray]:
        out, _ = mlp_forward(self.params, self.inputs(x, y, t))
        return out[:, : self.dim_x], out[:, self.dim_x :]

    def with_params(self, params: MlpParams) -> "VelocityModel":
        return VelocityModel(params, self.dim_x, self.dim_y, self.time_encoding)

    def meta(self) -> dict:
        return {"dim_x": self.dim_x, "dim_y": self.dim_y, "time_encoding": self.time_encoding}


def init_model(dim_x, dim_y, hidden=(128, 128, 128, 128), activation="silu", time_encoding="raw", rng=None):
    rng = make_rng(0) if rng is None else rng
    widths = [dim_x + dim_y + time_width(time_encoding), *hidden, dim_x + dim_y]
    return VelocityModel(mlp_init(widths, activation, rng), dim_x, dim_y, time_encoding)


def model_velocity(model: VelocityModel, state: CoupledState) -> tuple[np.ndarray, np.ndarray]:
    return model(state.x, state.y, state.t)


def draw_noise(n, dim_x, dim_y, rng: np.random.Generator) -> NoiseDraws:
    t = rng.random(n)
    return NoiseDraws(t, rng.standard_normal((n, dim_x)), rng.standard_normal((n, dim_y)))


def loss_and_grad(model: VelocityModel, x, y, noise: NoiseDraws, objective="symmetric"):
    """Mean squared velocity error and its parameter gradients, for fixed noise.

    ``symmetric`` regresses both heads on the coupled path. ``conditional`` is
    the plain conditional FM baseline: y stays at its code for every t and only
    the x head is penalised.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if len(x) == 0:
        raise ValueError("empty batch")
    if len(x) != len(y):
        raise ValueError(f"{len(x)} data rows but {len(y)} label rows")
    state = perturb(x, y, noise.t, noise.xi_x, noise.xi_y)
    vx, vy = target_velocity(x, y, noise.xi_x, noise.xi_y)
    if objective == "symmetric":
        inp = model.inputs(state.x, state.y, noise.t)
        target = np.concatenate([vx, vy], axis=1)
        mask = None
    elif objective == "conditional":
        inp = model.inputs(state.x, y, noise.t)
        target = np.concatenate([vx, np.zeros_like(vy)], axis=1)
        mask = np.r_[np.ones(model.dim_x), np.zeros(model.dim_y)]
    else:
        raise ValueError(f"unknown objective {objective!r}")
    out, cache = mlp_forward(model.params, inp)
    diff = out - target
    if mask is not None:
        diff = diff * mask
    n_terms = diff.shape[0] * (diff.shape[1] if mask is None else model.dim_x)
    loss = float((diff**2).sum() / n_terms)
    grads, _ = mlp_backward(model.params, cache, 2.0 * diff / n_terms)
    return loss, grads


def symmflow_loss_and_grad(model, x, y, rng):
    noise = draw_noise(len(np.atleast_2d(x)), model.dim_x, model.dim_y, rng)
    return loss_and_grad(model, x, y, noise, "symmetric")


def conditional_baseline_loss_and_grad(model, x, y, rng):
    noise = draw_noise(len(np.atleast_2d(x)), model.dim_x, model.dim_y, rng)
    return loss_and_grad(model, x, y, noise, "conditional")


@dataclass
class TrainConfig:
    epochs: int = 800
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    cosine: bool = True
    objective: str = "symmetric"
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ValueError(f"train.epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"train.objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if not self.lr > 0:
            raise ValueError(f"train.lr must be positive, got {self.lr}")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    model: VelocityModel
    history: list[float] = field(default_factory=list)
    steps: int = 0


def train(model: VelocityModel, x, labels, codebook: ClassCodebook, config: TrainConfig) -> TrainResult:
    """Minibatch Adam on the chosen objective.

    Each epoch reshuffles, and every minibatch gets fresh label dequantization
    noise and fresh (t, xi_x, xi_y). Returns the final model and per-epoch mean loss.
    """
    config.validate()
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if len(x) == 0:
        raise ValueError("empty dataset")
    if labels.min() < 0 or labels.max() >= codebook.num_classes:
        raise IndexError(f"labels outside codebook range [0, {codebook.num_classes})")
    if codebook.dim_y != model.dim_y or x.shape[1] != model.dim_x:
        raise ValueError("dataset / codebook dimensions do not match the model")

    rng = make_rng(config.seed)
    arrays = model.params.arrays()
    opt = AdamState.zeros_like(arrays, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    n = len(x)
    per_epoch = math.ceil(n / config.batch_size)
    total = config.epochs * per_epoch
    history = []
    params = model.params
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            yb = dequantize(codebook, labels[idx], rng)
            noise = draw_noise(len(idx), model.dim_x, model.dim_y, rng)
            cur = model.with_params(params)
            loss, grads = loss_and_grad(cur, x[idx], yb, noise, config.objective)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch + 1}")
            lr = config.lr
            if config.cosine:
                lr = 0.5 * config.lr * (1 + math.cos(math.pi * opt.step / total))
            arrays, opt = adam_step(arrays, grads, opt, lr=lr)
            params = params.with_arrays(arrays)
            losses.append(loss * len(idx))
        history.append(sum(losses) / n)
        if (epoch + 1) % 500 == 0:
            log.info("epoch %d loss %.5f", epoch + 1, history[-1])
    return TrainResult(model.with_params(params), history, opt.step)
