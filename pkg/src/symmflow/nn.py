"""Dense MLP with hand-written reverse-mode gradients and Adam.

Everything here works on float64 numpy arrays. Batches are rows: an input
of shape ``(batch, widths[0])`` maps to an output of shape
``(batch, widths[-1])``. Weights are stored as ``(fan_out, fan_in)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import json

import numpy as np
from scipy.special import expit

FORMAT_VERSION = 1
ACTIVATIONS = ("silu", "tanh", "relu")


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """PCG64 generator; the draw sequence depends only on ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def _act(name, z):
    """Returns (activation, aux) where aux is whatever ``_act_grad`` needs."""
    if name == "silu":
        s = expit(z)
        return z * s, s
    if name == "tanh":
        a = np.tanh(z)
        return a, a
    if name == "relu":
        return np.maximum(z, 0.0), None
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, aux):
    if name == "silu":
        return aux * (1.0 + z * (1.0 - aux))
    if name == "tanh":
        return 1.0 - aux**2
    return (z > 0).astype(np.float64)


@dataclass
class MlpParams:
    widths: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "silu"

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "MlpParams":
        return replace(self, weights=list(arrays[0::2]), biases=list(arrays[1::2]))

    def copy(self) -> "MlpParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def num_parameters(self) -> int:
        return sum(a.size for a in self.arrays())


@dataclass
class ForwardCache:
    params_id: int
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activation of each layer
    aux: list  # activation-derivative helpers per hidden layer


def mlp_init(widths: Sequence[int], activation: str, rng: np.random.Generator) -> MlpParams:
    """Gaussian weights scaled by sqrt(2 / fan_in), zero biases."""
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise ValueError("widths needs at least an input and an output size")
    if any(w < 1 for w in widths):
        raise ValueError(f"layer widths must be >= 1, got {widths}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpParams(widths, weights, biases, activation)


def mlp_forward(params: MlpParams, inputs: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    h = np.asarray(inputs, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != params.widths[0]:
        raise ValueError(f"expected input of shape (batch, {params.widths[0]}), got {h.shape}")
    layer_inputs, pre, aux = [], [], []
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        layer_inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        if k == last:
            h = z
        else:
            h, a = _act(params.activation, z)
            aux.append(a)
    return h, ForwardCache(id(params), layer_inputs, pre, aux)


def mlp_backward(
    params: MlpParams, cache: ForwardCache, output_grad: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate ``output_grad`` (dL/d output).

    Returns the parameter gradients in ``params.arrays()`` order and dL/d input.
    """
    if cache.params_id != id(params) or len(cache.pre) != params.n_layers:
        raise ValueError("forward cache does not belong to these parameters")
    g = np.asarray(output_grad, dtype=np.float64)
    if g.shape != cache.pre[-1].shape:
        raise ValueError(f"output_grad shape {g.shape} != forward output shape {cache.pre[-1].shape}")
    grads: list[np.ndarray] = [None] * (2 * params.n_layers)  # type: ignore[list-item]
    for k in range(params.n_layers - 1, -1, -1):
        if k != params.n_layers - 1:
            g = g * _act_grad(params.activation, cache.pre[k], cache.aux[k])
        grads[2 * k] = g.T @ cache.inputs[k]
        grads[2 * k + 1] = g.sum(axis=0)
        g = g @ params.weights[k]
    return grads, g


def finite_diff_grad(
    loss_fn: Callable[[list[np.ndarray]], float], arrays: Sequence[np.ndarray], h: float = 1e-5
) -> list[np.ndarray]:
    """Central differences of ``loss_fn`` w.r.t. every entry of ``arrays``.

    ``loss_fn`` receives a list of perturbed copies; the inputs are not modified.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    work = [np.array(a, dtype=np.float64, copy=True) for a in arrays]
    grads = [np.zeros_like(a) for a in work]
    for a, g in zip(work, grads):
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(work)
            flat[i] = orig - h
            down = loss_fn(work)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
    return grads


def max_relative_error(a: Sequence[np.ndarray], b: Sequence[np.ndarray], floor: float = 1e-8) -> float:
    """max |a-b| / max(|a|, |b|, floor) over all coordinates."""
    worst = 0.0
    for x, y in zip(a, b):
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **hyper)


def adam_step(
    arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState, lr: float | None = None
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Returns new arrays and a new state.

    ``lr`` overrides ``state.lr`` for this step (used by LR schedules).
    """
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ValueError("parameter, gradient and moment lists differ in length")
    lr = state.lr if lr is None else lr
    b1, b2 = state.beta1, state.beta2
    t = state.step + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch {p.shape} / {g.shape} / {m.shape}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, replace(state, m=new_m, v=new_v, step=t)


# -- checkpoint text format -------------------------------------------------


def _fmt(values: np.ndarray) -> str:
    return " ".join(format(float(x), ".17g") for x in values.reshape(-1))


def save_checkpoint(path: str | Path, params: MlpParams, meta: dict | None = None) -> None:
    """Write params as plain text; floats use 17 significant digits."""
    lines = [
        "# symmflow mlp checkpoint",
        f"format_version {FORMAT_VERSION}",
        f"activation {params.activation}",
        "widths " + " ".join(str(w) for w in params.widths),
        "meta " + json.dumps(meta or {}, sort_keys=True),
    ]
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        lines.append(f"weight {k} {w.shape[0]} {w.shape[1]}")
        lines.extend(_fmt(row) for row in w)
        lines.append(f"bias {k} {b.shape[0]}")
        lines.append(_fmt(b))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[MlpParams, dict]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    it = iter(lines)

    def header(key):
        line = next(it)
        name, _, rest = line.partition(" ")
        if name != key:
            raise ValueError(f"checkpoint: expected {key!r}, found {line[:40]!r}")
        return rest

    version = int(header("format_version"))
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version}")
    activation = header("activation").strip()
    widths = [int(s) for s in header("widths").split()]
    meta = json.loads(header("meta"))
    weights, biases = [], []
    for k in range(len(widths) - 1):
        rows, cols = (int(s) for s in header("weight").split()[1:])
        if (rows, cols) != (widths[k + 1], widths[k]):
            raise ValueError(f"checkpoint: layer {k} weight shape {(rows, cols)} disagrees with widths")
        weights.append(np.array([[float(s) for s in next(it).split()] for _ in range(rows)]))
        (n,) = (int(s) for s in header("bias").split()[1:])
        biases.append(np.array([float(s) for s in next(it).split()]).reshape(n))
    return MlpParams(widths, weights, biases, activation), meta
