"""Accuracy, step sweeps, MMD, and the per-class velocity-error classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .codec import ClassCodebook
from .flow import VelocityModel, perturb, target_velocity
from .nn import make_rng
from .ode import SolverConfig, classify


def accuracy(predictions, labels) -> float:
    p, y = np.asarray(predictions), np.asarray(labels)
    if p.shape != y.shape:
        raise ValueError(f"{p.size} predictions vs {y.size} labels")
    if p.size == 0:
        raise ValueError("accuracy of an empty set")
    return float((p == y).mean())


@dataclass
class SweepResult:
    steps: list[int]
    accuracy: list[float]
    provenance: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.steps, self.accuracy))


def sweep_steps(model: VelocityModel, codebook: ClassCodebook, x, labels, steps_list, seed,
                scheme: str = "euler", K: int = 1, freeze_x: bool = False) -> SweepResult:
    """Classify the whole test set once per step count.

    Each step count draws its starting noise from its own stream
    ``(*seed, steps)``, so a row does not depend on which other rows were requested.
    """
    base = [int(v) for v in np.atleast_1d(seed)]
    steps_list = [int(s) for s in steps_list]
    if not steps_list:
        raise ValueError("steps_list is empty")
    if any(b <= a for a, b in zip(steps_list, steps_list[1:])):
        raise ValueError(f"steps_list must be strictly increasing, got {steps_list}")
    accs = []
    for s in steps_list:
        pred, _ = classify(model, codebook, x, make_rng(base + [s]), SolverConfig(scheme, s), K, freeze_x)
        accs.append(accuracy(pred, labels))
    prov = {"seed": base, "scheme": scheme, "K": K, "freeze_x": freeze_x, "n_test": int(len(labels))}
    return SweepResult(steps_list, accs, prov)


# -- MMD ---------------------------------------------------------------------


def _sq_dists(a, b):
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2 * a @ b.T
    return np.maximum(d, 0.0)


def median_bandwidth(points) -> float:
    """Median pairwise Euclidean distance (distinct pairs) of ``points``."""
    p = np.asarray(points, dtype=np.float64)
    iu = np.triu_indices(len(p), k=1)
    return float(np.median(np.sqrt(_sq_dists(p, p)[iu])))


def mmd_rbf(set_a, set_b, bandwidth: float | None = None, biased: bool = False) -> tuple[float, float]:
    """Squared MMD with kernel exp(-|a-b|^2 / 2h^2). Returns (mmd2, h).

    The default unbiased estimate drops the self-pair terms and can dip
    slightly below zero. ``bandwidth=None`` uses the median heuristic on the
    pooled sets.
    """
    a = np.atleast_2d(np.asarray(set_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(set_b, dtype=np.float64))
    m, n = len(a), len(b)
    if m < 2 or n < 2:
        raise ValueError(f"MMD needs at least 2 points per set, got {m} and {n}")
    h = median_bandwidth(np.concatenate([a, b])) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    kaa = np.exp(-_sq_dists(a, a) / (2 * h * h))
    kbb = np.exp(-_sq_dists(b, b) / (2 * h * h))
    kab = np.exp(-_sq_dists(a, b) / (2 * h * h))
    if biased:
        return float(kaa.mean() + kbb.mean() - 2 * kab.mean()), h
    # kaa, kbb diagonals are exactly 1
    saa = (kaa.sum() - m) / (m * (m - 1))
    sbb = (kbb.sum() - n) / (n * (n - 1))
    return float(saa + sbb - 2 * kab.mean()), h


# -- Bayes-rule baseline -------------------------------------------------------


def velocity_errors(model: VelocityModel, codebook: ClassCodebook, x_obs, n_mc: int, rng) -> np.ndarray:
    """Per-class mean squared velocity error, shape (n_points, num_classes).

    The same (t, xi_x, xi_y) draws are used for every class of a point.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    x = np.atleast_2d(np.asarray(x_obs, dtype=np.float64))
    n, c = len(x), codebook.num_classes
    t = rng.random((n, n_mc))
    xi_x = rng.standard_normal((n, n_mc, model.dim_x))
    xi_y = rng.standard_normal((n, n_mc, model.dim_y))
    # rows ordered (point, class, draw)
    xr = np.broadcast_to(x[:, None, None, :], (n, c, n_mc, model.dim_x)).reshape(-1, model.dim_x)
    yr = np.broadcast_to(codebook.centers[None, :, None, :], (n, c, n_mc, model.dim_y)).reshape(-1, model.dim_y)
    tr = np.broadcast_to(t[:, None, :], (n, c, n_mc)).reshape(-1)
    nxr = np.broadcast_to(xi_x[:, None], (n, c, n_mc, model.dim_x)).reshape(-1, model.dim_x)
    nyr = np.broadcast_to(xi_y[:, None], (n, c, n_mc, model.dim_y)).reshape(-1, model.dim_y)
    state = perturb(xr, yr, tr, nxr, nyr)
    vx, vy = target_velocity(xr, yr, nxr, nyr)
    px, py = model(state.x, state.y, tr)
    sq = np.concatenate([px - vx, py - vy], axis=1) ** 2
    return sq.mean(axis=1).reshape(n, c, n_mc).mean(axis=2)


def bayes_classify(model: VelocityModel, codebook: ClassCodebook, x_obs, n_mc: int, rng) -> np.ndarray:
    """Posterior over classes: softmax of the negated per-class velocity error.

    Uniform class prior. One point gives shape ``(num_classes,)``, a batch
    gives ``(n, num_classes)``.
    """
    single = np.asarray(x_obs).ndim == 1
    post = softmax(-velocity_errors(model, codebook, x_obs, n_mc, rng), axis=1)
    return post[0] if single else post
