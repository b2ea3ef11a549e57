"""Multi-view datasets: manifest loading, splits, scaling, noise, pseudo-view.

A manifest is JSON::

    {"k": 10,
     "views": [{"name": "fou", "path": "fou.csv"}, ...],
     "labels": "labels.csv"}

Paths are relative to the manifest. View files are headerless CSV of reals,
the label file one integer per line. All randomness goes through numpy's
PCG64 generator seeded explicitly.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    pass


class MissingFile(DataError):
    pass


class RaggedData(DataError):
    pass


class NonNumericCell(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


@dataclass(frozen=True)
class MultiViewDataset:
    views: tuple[np.ndarray, ...]
    labels: np.ndarray
    k: int
    names: tuple[str, ...] = ()

    def __post_init__(self):
        views = tuple(np.asarray(v, dtype=float) for v in self.views)
        labels = np.asarray(self.labels, dtype=int)
        if not views:
            raise DataError("dataset needs at least one view")
        for i, v in enumerate(views):
            if v.ndim != 2 or v.shape[0] != labels.shape[0]:
                raise RaggedData(f"view {i} has shape {v.shape}, expected ({labels.shape[0]}, d)")
            if not np.all(np.isfinite(v)):
                raise DataError(f"view {i} contains non-finite values")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise LabelOutOfRange(f"labels must lie in [0, {self.k})")
        names = tuple(self.names) or tuple(f"view{i}" for i in range(len(views)))
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def m(self) -> int:
        return len(self.views)

    @property
    def view_widths(self) -> list[int]:
        return [v.shape[1] for v in self.views]

    def subset(self, idx) -> MultiViewDataset:
        return replace(self, views=tuple(v[idx] for v in self.views), labels=self.labels[idx])


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    views: Sequence[int] = (0,)
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class Standardizer:
    means: tuple[np.ndarray, ...]
    scales: tuple[np.ndarray, ...]

    def apply(self, ds: MultiViewDataset) -> MultiViewDataset:
        views = tuple((v - mu) / sd for v, mu, sd in zip(ds.views, self.means, self.scales))
        return replace(ds, views=views)

    def to_dict(self):
        return {"means": [m.tolist() for m in self.means], "scales": [s.tolist() for s in self.scales]}

    @classmethod
    def from_dict(cls, obj):
        return cls(tuple(np.array(m, dtype=float) for m in obj["means"]),
                   tuple(np.array(s, dtype=float) for s in obj["scales"]))


def _read_rows(path: Path) -> list[list[str]]:
    if not path.is_file():
        raise MissingFile(f"file not found: {path}")
    text = path.read_text()
    lines = text.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line.split(",") for line in lines]


def read_matrix(path: Path) -> np.ndarray:
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path} is empty")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for r, cells in enumerate(rows):
        if len(cells) != width:
            raise RaggedData(f"{path}:{r + 1}: expected {width} cells, found {len(cells)}")
        for c, cell in enumerate(cells):
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise NonNumericCell(f"{path}:{r + 1}:{c + 1}: not a number: {cell!r}") from None
    if not np.all(np.isfinite(out)):
        raise NonNumericCell(f"{path}: non-finite value")
    return out


def read_labels(path: Path) -> np.ndarray:
    rows = _read_rows(path)
    labels = np.empty(len(rows), dtype=int)
    for r, cells in enumerate(rows):
        if len(cells) != 1:
            raise RaggedData(f"{path}:{r + 1}: label file must have one column")
        try:
            labels[r] = int(cells[0])
        except ValueError:
            raise NonNumericCell(f"{path}:{r + 1}: not an integer: {cells[0]!r}") from None
    return labels


def load_manifest(path) -> MultiViewDataset:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        spec = json.loads(path.read_text())
        k = int(spec["k"])
        view_specs = spec["views"]
        label_path = spec["labels"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed manifest {path}: {exc}") from exc
    base = path.parent
    views, names = [], []
    for i, v in enumerate(view_specs):
        views.append(read_matrix(base / v["path"]))
        names.append(v.get("name", f"view{i}"))
    labels = read_labels(base / label_path)
    for name, v in zip(names, views):
        if v.shape[0] != labels.shape[0]:
            raise RaggedData(f"view {name!r} has {v.shape[0]} rows but there are {labels.shape[0]} labels")
    if labels.min() < 0 or labels.max() >= k:
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise LabelOutOfRange(f"label {bad} outside [0, {k})")
    return MultiViewDataset(tuple(views), labels, k, tuple(names))


def write_manifest(ds: MultiViewDataset, directory) -> Path:
    """Write ``ds`` as manifest + CSV files; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, v in zip(ds.names, ds.views):
        fname = f"{name}.csv"
        np.savetxt(directory / fname, v, delimiter=",", fmt="%.17g")
        entries.append({"name": name, "path": fname})
    np.savetxt(directory / "labels.csv", ds.labels, fmt="%d")
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"k": ds.k, "views": entries, "labels": "labels.csv"}, indent=2))
    return manifest


def split_indices(labels: np.ndarray, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified split. Classes with fewer than two samples go to train."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n = labels.shape[0]
    n_test = int(round(test_fraction * n))
    classes, counts = np.unique(labels, return_counts=True)
    tiny = classes[counts < 2]
    if tiny.size:
        warnings.warn(f"classes {tiny.tolist()} have < 2 samples; not stratified", stacklevel=2)

    # largest-remainder allocation of the test budget over classes
    eligible = counts >= 2
    quota = np.where(eligible, counts * test_fraction, 0.0)
    alloc = np.floor(quota).astype(int)
    alloc = np.minimum(alloc, counts - 1)
    remaining = n_test - alloc.sum()
    if remaining > 0:
        order = np.argsort(-(quota - alloc), kind="stable")
        for j in order:
            if remaining == 0:
                break
            if eligible[j] and alloc[j] < counts[j] - 1:
                alloc[j] += 1
                remaining -= 1

    test = []
    for c, a in zip(classes, alloc):
        members = np.flatnonzero(labels == c)
        test.append(rng.permutation(members)[:a])
    test_idx = np.sort(np.concatenate(test)) if test else np.array([], dtype=int)
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


def split(ds: MultiViewDataset, test_fraction: float = 0.2, seed: int = 0):
    train_idx, test_idx = split_indices(ds.labels, test_fraction, seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def fit_standardizer(train: MultiViewDataset) -> Standardizer:
    if train.n == 0:
        raise DataError("cannot standardise an empty training set")
    means, scales = [], []
    for v in train.views:
        mu = v.mean(axis=0)
        sd = v.std(axis=0)
        # near-constant columns: centre only
        sd = np.where(sd > 1e-12 * np.maximum(1.0, np.abs(mu)), sd, 1.0)
        means.append(mu)
        scales.append(sd)
    return Standardizer(tuple(means), tuple(scales))


def standardize(train: MultiViewDataset, test: MultiViewDataset | None = None):
    stats = fit_standardizer(train)
    return stats.apply(train), (stats.apply(test) if test is not None else None), stats


def inject_noise(ds: MultiViewDataset, spec: NoiseSpec) -> MultiViewDataset:
    for v in spec.views:
        if not 0 <= v < ds.m:
            raise ValueError(f"noise view {v} out of range for {ds.m} views")
    if spec.sigma == 0:
        return ds
    rng = np.random.default_rng(spec.seed)
    views = list(ds.views)
    for v in sorted(set(spec.views)):
        views[v] = views[v] + rng.normal(0.0, spec.sigma, size=views[v].shape)
    return replace(ds, views=tuple(views))


def build_pseudo_view(ds: MultiViewDataset) -> MultiViewDataset:
    if ds.m < 2:
        raise ValueError("pseudo-view needs at least two views")
    pseudo = np.concatenate(ds.views, axis=1)
    return replace(ds, views=ds.views + (pseudo,), names=ds.names + ("pseudo",))


def make_blobs(
    n: int = 200,
    k: int = 2,
    view_dims: Sequence[int] = (2, 2),
    separation: float = 6.0,
    seed: int = 0,
) -> MultiViewDataset:
    """Gaussian blobs per view, class means ``separation`` unit-sigmas apart."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % k
    rng.shuffle(labels)
    views = []
    for d in view_dims:
        centres = rng.normal(size=(k, d))
        # rescale so the closest pair of centres is exactly `separation` apart
        gaps = [np.linalg.norm(centres[i] - centres[j]) for i in range(k) for j in range(i + 1, k)]
        centres *= separation / min(gaps)
        views.append(centres[labels] + rng.normal(size=(n, d)))
    return MultiViewDataset(tuple(views), labels, k)
