"""Fixed-step integration of the coupled field, forward (generate) and backward (classify)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .codec import ClassCodebook, decode_ensemble, dequantize
from .flow import CoupledState

SCHEMES = ("euler", "midpoint", "rk4")

Field = Callable[[np.ndarray, np.ndarray, float], tuple[np.ndarray, np.ndarray]]


class IntegrationError(FloatingPointError):
    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state after step {step} (t={t:.6g})")
        self.step = step


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = "euler"
    steps: int = 20
    record_trajectory: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"solver.scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"solver.steps must be a positive integer, got {self.steps}")


def _step(field: Field, scheme: str, x, y, t, h):
    if scheme == "euler":
        kx, ky = field(x, y, t)
        return x + h * kx, y + h * ky
    if scheme == "midpoint":
        k1x, k1y = field(x, y, t)
        k2x, k2y = field(x + 0.5 * h * k1x, y + 0.5 * h * k1y, t + 0.5 * h)
        return x + h * k2x, y + h * k2y
    k1x, k1y = field(x, y, t)
    k2x, k2y = field(x + 0.5 * h * k1x, y + 0.5 * h * k1y, t + 0.5 * h)
    k3x, k3y = field(x + 0.5 * h * k2x, y + 0.5 * h * k2y, t + 0.5 * h)
    k4x, k4y = field(x + h * k3x, y + h * k3y, t + h)
    return (
        x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
        y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y),
    )


def integrate(
    field: Field,
    initial: CoupledState,
    t_start: float,
    t_end: float,
    config: SolverConfig,
    freeze_x: bool = False,
) -> tuple[CoupledState, list[CoupledState] | None]:
    """Advance (x, y) jointly from ``t_start`` to ``t_end`` on the grid k/steps.

    Going 1 -> 0 uses a negative step. With ``freeze_x`` the x component is
    held at its initial value and only y moves.
    """
    if {t_start, t_end} != {0, 1}:
        raise ValueError(f"integration runs between t=0 and t=1, got {t_start} -> {t_end}")
    n = config.steps
    h = (t_end - t_start) / n
    x = np.array(initial.x, dtype=np.float64)
    y = np.array(initial.y, dtype=np.float64)
    if freeze_x:
        inner = field

        def field(x, y, t):
            return np.zeros_like(x), inner(x, y, t)[1]

    traj = [CoupledState(x.copy(), y.copy(), float(t_start))] if config.record_trajectory else None
    for k in range(n):
        # grid time from the index, not by accumulation
        t = t_start + (t_end - t_start) * (k / n)
        x, y = _step(field, config.scheme, x, y, t, h)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise IntegrationError(k + 1, t + h)
        if traj is not None:
            traj.append(CoupledState(x.copy(), y.copy(), t_start + (t_end - t_start) * ((k + 1) / n)))
    return CoupledState(x, y, float(t_end)), traj


def generate(model, codebook: ClassCodebook, class_idx: int, n: int, rng: np.random.Generator,
             config: SolverConfig = SolverConfig()) -> np.ndarray:
    """``n`` samples of class ``class_idx``: integrate noise x and a dequantized code 0 -> 1."""
    if not 0 <= class_idx < codebook.num_classes:
        raise IndexError(f"class {class_idx} outside [0, {codebook.num_classes})")
    if n == 0:
        return np.zeros((0, model.dim_x))
    x0 = rng.standard_normal((n, model.dim_x))
    y0 = dequantize(codebook, np.full(n, class_idx), rng)
    final, _ = integrate(model, CoupledState(x0, y0, 0.0), 0.0, 1.0, config)
    return final.x


def classify(model, codebook: ClassCodebook, x_obs, rng: np.random.Generator,
             config: SolverConfig = SolverConfig(steps=1), K: int = 1, freeze_x: bool = False):
    """Recover labels by integrating from (x_obs, noise) at t=1 back to t=0.

    Accepts one observation ``(dim_x,)`` or a batch ``(n, dim_x)``. Returns
    the decoded class(es) and the y_0 averaged over ``K`` trajectories.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    x = np.asarray(x_obs, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.dim_x:
        raise ValueError(f"observation dim {x.shape[1]} != model dim_x {model.dim_x}")
    n = len(x)
    y1 = rng.standard_normal((K, n, model.dim_y))
    start = CoupledState(np.tile(x, (K, 1)), y1.reshape(K * n, model.dim_y), 1.0)
    final, _ = integrate(model, start, 1.0, 0.0, config, freeze_x=freeze_x)
    y0 = final.y.reshape(K, n, model.dim_y)
    pred = decode_ensemble(codebook, y0)
    mean_y0 = y0.mean(axis=0)
    if single:
        return int(pred[0]), mean_y0[0]
    return pred, mean_y0


def trajectory_rows(traj: list[CoupledState]):
    """Flatten a recorded trajectory into (step, t, sample, x..., y...) rows."""
    rows = []
    for k, s in enumerate(traj):
        for i, (xi, yi) in enumerate(zip(np.atleast_2d(s.x), np.atleast_2d(s.y))):
            rows.append([k, float(s.t), i, *xi.tolist(), *yi.tolist()])
    return rows
