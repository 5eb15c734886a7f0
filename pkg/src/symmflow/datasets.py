"""Seeded synthetic 2-D labelled point clouds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .nn import make_rng


@dataclass
class Dataset:
    x: np.ndarray  # (n, dim_x)
    labels: np.ndarray  # (n,) int
    num_classes: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.x) != len(self.labels):
            raise ValueError("x and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("label outside [0, num_classes)")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("non-finite coordinates")

    def __len__(self):
        return len(self.labels)

    @property
    def dim_x(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        return replace(self, x=self.x[idx], labels=self.labels[idx])

    def of_class(self, c: int) -> np.ndarray:
        return self.x[self.labels == c]


@dataclass
class SpiralConfig:
    n_per_class: int = 1000
    theta_lo: float = 0.5 * math.pi
    theta_hi: float = 2 * math.pi
    noise_sigma: float = 0.02
    seed: int = 7

    def validate(self):
        if self.n_per_class < 1:
            raise ValueError(f"n_per_class must be >= 1, got {self.n_per_class}")
        if not self.theta_hi > self.theta_lo > 0:
            raise ValueError(f"need theta_hi > theta_lo > 0, got [{self.theta_lo}, {self.theta_hi}]")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def spiral_arm(theta, theta_hi) -> np.ndarray:
    """Noise-free class-A point(s) at angle ``theta``; radius grows linearly to 1."""
    theta = np.asarray(theta, dtype=np.float64)
    r = theta / theta_hi
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    centered = x - mean
    scale = np.sqrt((centered**2).mean(axis=0))
    return centered / scale, mean, scale


def two_spirals(config: SpiralConfig = SpiralConfig()) -> Dataset:
    """Two interleaved arms; class B is class A rotated by pi. Output is standardized."""
    config.validate()
    rng = make_rng(config.seed)
    n = config.n_per_class
    arms = []
    for sign in (1.0, -1.0):
        u = rng.random(n)
        theta = config.theta_lo + (config.theta_hi - config.theta_lo) * u
        pts = sign * spiral_arm(theta, config.theta_hi)
        arms.append(pts + config.noise_sigma * rng.standard_normal((n, 2)))
    raw = np.concatenate(arms)
    x, mean, scale = standardize(raw)
    labels = np.repeat([0, 1], n)
    meta = {"generator": "two_spirals", **asdict(config), "mean": mean.tolist(), "scale": scale.tolist()}
    return Dataset(x, labels, 2, meta)


def gaussian_mixture(k_components: int, n_per_class: int, num_classes: int, seed: int, std: float = 0.05) -> Dataset:
    """Components on the unit circle, assigned to classes round-robin. Not standardized."""
    if num_classes < 1 or n_per_class < 1 or k_components < num_classes:
        raise ValueError(
            f"need k_components >= num_classes >= 1 and n_per_class >= 1, got "
            f"k={k_components}, classes={num_classes}, n={n_per_class}"
        )
    rng = make_rng(seed)
    angles = 2 * np.pi * np.arange(k_components) / k_components
    means = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    xs, labels, comps = [], [], []
    for c in range(num_classes):
        mine = np.arange(c, k_components, num_classes)
        comp = mine[np.arange(n_per_class) % len(mine)]
        xs.append(means[comp] + std * rng.standard_normal((n_per_class, 2)))
        labels.append(np.full(n_per_class, c))
        comps.append(comp)
    meta = {
        "generator": "gaussian_mixture",
        "k_components": k_components,
        "n_per_class": n_per_class,
        "num_classes": num_classes,
        "seed": seed,
        "std": std,
        "means": means.tolist(),
        "components": np.concatenate(comps).tolist(),
    }
    return Dataset(np.concatenate(xs), np.concatenate(labels), num_classes, meta)


def split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random partition into (train, test); test gets round(n * fraction) points."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    perm = make_rng(seed).permutation(len(ds))
    n_test = int(round(len(ds) * test_fraction))
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


# -- CSV ---------------------------------------------------------------------


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def to_csv(ds: Dataset, include_labels: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = [f"x{j}" for j in range(ds.dim_x)]
    w.writerow(cols + (["label"] if include_labels else []))
    for xi, lab in zip(ds.x, ds.labels):
        w.writerow([format_float(v) for v in xi] + ([int(lab)] if include_labels else []))
    return buf.getvalue()


class CsvFormatError(ValueError):
    pass


def read_points_csv(path: str | Path, num_classes: int | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Read ``x0,x1,...[,label]``. Returns (x, labels or None).

    Lines starting with ``#`` are skipped. Malformed rows raise
    ``CsvFormatError`` naming every offending line number.
    """
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header, rows, bad = None, [], []
    for lineno, row in enumerate(reader, start=1):
        if not row or row[0].startswith("#"):
            continue
        if header is None:
            header = [h.strip() for h in row]
            continue
        rows.append((lineno, row))
    if header is None:
        raise CsvFormatError(f"{path}: empty file")
    has_label = header[-1] == "label"
    dim = len(header) - has_label
    if dim < 1 or any(not h.startswith("x") for h in header[:dim]):
        raise CsvFormatError(f"{path}: header must be x0,x1,...[,label], got {','.join(header)}")
    xs, labels = [], []
    for lineno, row in rows:
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(row)}")
            vals = [float(v) for v in row[:dim]]
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("non-finite coordinate")
            if has_label:
                lab = int(row[dim])
                if lab < 0 or (num_classes is not None and lab >= num_classes):
                    raise ValueError(f"label {lab} out of range")
                labels.append(lab)
            xs.append(vals)
        except ValueError as exc:
            bad.append(f"line {lineno}: {exc}")
    if bad:
        raise CsvFormatError(f"{path}: malformed rows\n  " + "\n  ".join(bad))
    x = np.array(xs, dtype=np.float64).reshape(len(xs), dim)
    return x, (np.array(labels, dtype=np.int64) if has_label else None)
