"""Class index <-> continuous label code.

Class ``i`` of ``n`` maps to the scalar ``-1 + 2 i / (n - 1)``, replicated
across ``dim_y`` coordinates. Training labels are dequantized with uniform
noise of half-width ``beta``; predictions decode to the nearest center.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClassCodebook:
    centers: np.ndarray  # (num_classes, dim_y)
    beta: float

    @property
    def num_classes(self) -> int:
        return self.centers.shape[0]

    @property
    def dim_y(self) -> int:
        return self.centers.shape[1]

    def min_gap(self) -> float:
        c = self.centers
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        return float(d[~np.eye(len(c), dtype=bool)].min())

    def supports(self) -> list[tuple[float, float]]:
        """Per-class interval of dequantized values (first coordinate)."""
        return [(float(c[0] - self.beta), float(c[0] + self.beta)) for c in self.centers]

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "dim_y": self.dim_y,
            "beta": self.beta,
            "centers": self.centers.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassCodebook":
        if "centers" in d:
            return cls(np.asarray(d["centers"], dtype=np.float64), float(d["beta"]))
        return build_codebook(int(d["num_classes"]), int(d.get("dim_y", 1)), d.get("beta"))


def default_beta(num_classes: int) -> float:
    """0.5 for two classes (supports [-1.5,-0.5] and [0.5,1.5]); else 0.4 x gap."""
    if num_classes == 2:
        return 0.5
    return 0.4 * 2.0 / (num_classes - 1)


def build_codebook(num_classes: int, dim_y: int = 1, beta: float | None = None) -> ClassCodebook:
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    if dim_y < 1:
        raise ValueError(f"dim_y must be >= 1, got {dim_y}")
    if beta is None:
        beta = default_beta(num_classes)
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    scalar = -1.0 + 2.0 * np.arange(num_classes) / (num_classes - 1)
    book = ClassCodebook(np.repeat(scalar[:, None], dim_y, axis=1), float(beta))
    # unambiguous decoding needs each support to stay inside its Voronoi cell
    if beta >= 0.5 * 2.0 / (num_classes - 1):
        warnings.warn(f"beta={beta} overlaps neighbouring class supports; decoding is ambiguous", stacklevel=2)
    return book


def _check_idx(codebook: ClassCodebook, idx: np.ndarray) -> np.ndarray:
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= codebook.num_classes):
        raise IndexError(f"class index out of range [0, {codebook.num_classes})")
    return idx.astype(np.int64)


def dequantize(codebook: ClassCodebook, class_idx, rng: np.random.Generator) -> np.ndarray:
    """center + U(-beta, beta) noise, independent per coordinate.

    A scalar index gives a ``(dim_y,)`` vector, an index array gives
    ``(n, dim_y)`` rows.
    """
    idx = _check_idx(codebook, class_idx)
    centers = codebook.centers[idx]
    return centers + rng.uniform(-codebook.beta, codebook.beta, size=centers.shape)


def decode(codebook: ClassCodebook, y_pred: np.ndarray) -> np.ndarray | int:
    """Nearest center by L2 distance; equidistant points go to the lower index."""
    y = np.asarray(y_pred, dtype=np.float64)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[1] != codebook.dim_y:
        raise ValueError(f"prediction has dim {y.shape[1]}, codebook dim_y is {codebook.dim_y}")
    d2 = ((y[:, None, :] - codebook.centers[None, :, :]) ** 2).sum(-1)
    out = np.argmin(d2, axis=1)  # first minimum wins
    return int(out[0]) if single else out


def decode_ensemble(codebook: ClassCodebook, y_preds) -> np.ndarray | int:
    """Decode the coordinate-wise mean over the leading (ensemble) axis."""
    y = np.asarray(y_preds, dtype=np.float64)
    if y.shape[0] == 0:
        raise ValueError("decode_ensemble needs at least one prediction")
    if y.ndim == 1:
        y = y[:, None]
    return decode(codebook, y.mean(axis=0))
