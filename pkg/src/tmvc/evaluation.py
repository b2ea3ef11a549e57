"""Uncertainty-aware metrics over per-sample prediction records."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.stats import rankdata

from .data import MultiViewDataset, NoiseSpec, inject_noise

AUROC_NOTE = "macro one-vs-rest AUROC over fused expected probabilities, midrank ties"


@dataclass
class Records:
    """Columnar per-sample results: truth, prediction, fused u, beliefs, expected probs."""

    truth: np.ndarray
    pred: np.ndarray
    u: np.ndarray
    belief: np.ndarray
    probs: np.ndarray

    def __len__(self):
        return int(self.truth.shape[0])

    @property
    def k(self) -> int:
        return self.probs.shape[1]

    def subset(self, mask) -> Records:
        return Records(self.truth[mask], self.pred[mask], self.u[mask], self.belief[mask], self.probs[mask])


def predict_records(model, ds: MultiViewDataset) -> Records:
    pred, belief, u, probs = model.predict(ds.views)
    return Records(ds.labels.copy(), pred, u, belief, probs)


def accuracy(rec: Records) -> float:
    if len(rec) == 0:
        raise ValueError("accuracy of an empty record set")
    return float(np.mean(rec.truth == rec.pred))


def binary_auroc(positive: np.ndarray, scores: np.ndarray) -> float:
    """Mann-Whitney AUROC with midranks for ties."""
    positive = np.asarray(positive, dtype=bool)
    n_pos = positive.sum()
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need both positives and negatives")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auroc(rec: Records) -> float:
    present = np.unique(rec.truth)
    if present.size < 2:
        raise ValueError("AUROC needs at least two classes present")
    missing = sorted(set(range(rec.k)) - set(present.tolist()))
    if missing:
        warnings.warn(f"classes {missing} absent from truth; excluded from macro AUROC", stacklevel=2)
    return float(np.mean([binary_auroc(rec.truth == c, rec.probs[:, c]) for c in present]))


def threshold_curve(rec: Records, grid: Sequence[float]) -> list[tuple[float, float, float | None]]:
    """(tau, coverage, accuracy on samples with u <= tau); accuracy is None when nothing is kept."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("threshold grid must be sorted ascending")
    out = []
    correct = rec.truth == rec.pred
    for tau in grid:
        keep = rec.u <= tau
        n_keep = int(keep.sum())
        acc = float(correct[keep].mean()) if n_keep else None
        out.append((float(tau), n_keep / len(rec), acc))
    return out


def uncertainty_density(rec: Records, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Histogram counts of fused u over [0, 1]; returns (counts, edges)."""
    if bins < 2:
        raise ValueError("need at least two bins")
    counts, edges = np.histogram(np.clip(rec.u, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return counts, edges


@dataclass
class SubjectiveConfusion:
    matrix: np.ndarray  # (K, K+1): true class x (predicted classes..., uncertain)
    counts: np.ndarray
    certain_error_rate: float | None
    overall_error_rate: float

    def standard_confusion(self) -> np.ndarray:
        """Row-normalised confusion over retained (non-uncertain) samples."""
        m = self.counts[:, :-1].astype(float)
        totals = m.sum(axis=1, keepdims=True)
        return np.divide(m, totals, out=np.zeros_like(m), where=totals > 0)


def subjective_confusion(rec: Records) -> SubjectiveConfusion:
    """Samples whose u exceeds their largest belief land in the 'uncertain' column.

    Rows for classes absent from the truth are left all-zero.
    """
    if len(rec) == 0:
        raise ValueError("empty record set")
    k = rec.k
    uncertain = rec.u > rec.belief.max(axis=1)
    counts = np.zeros((k, k + 1), dtype=int)
    cols = np.where(uncertain, k, rec.pred)
    np.add.at(counts, (rec.truth, cols), 1)
    totals = counts.sum(axis=1, keepdims=True)
    matrix = np.divide(counts, totals, out=np.zeros(counts.shape), where=totals > 0)
    certain = ~uncertain
    wrong = rec.truth != rec.pred
    certain_err = float(wrong[certain].mean()) if certain.any() else None
    return SubjectiveConfusion(matrix, counts, certain_err, float(wrong.mean()))


def noise_sweep(model, test: MultiViewDataset, sigmas: Sequence[float], views: Sequence[int], seed: int = 0):
    """Accuracy and mean fused u on freshly noised copies of ``test``, one row per sigma."""
    rows = []
    for sigma in sigmas:
        noisy = inject_noise(test, NoiseSpec(float(sigma), tuple(views), seed))
        rec = predict_records(model, noisy)
        rows.append((float(sigma), accuracy(rec), float(rec.u.mean())))
    return rows


@dataclass
class EvalReport:
    accuracy: float
    auroc: float | None
    records: Records
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        r = self.records
        return {
            "accuracy": self.accuracy,
            "auroc": self.auroc,
            "auroc_definition": AUROC_NOTE,
            "n": len(r),
            "mean_uncertainty": float(r.u.mean()),
            **self.extra,
            "records": [
                {"truth": int(t), "pred": int(p), "u": float(u), "probs": [float(x) for x in pr]}
                for t, p, u, pr in zip(r.truth, r.pred, r.u, r.probs)
            ],
        }


def evaluate(model, ds: MultiViewDataset) -> EvalReport:
    rec = predict_records(model, ds)
    try:
        auc = auroc(rec)
    except ValueError:
        auc = None
    return EvalReport(accuracy(rec), auc, rec)
