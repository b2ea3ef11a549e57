"""Dirichlet parameters, subjective opinions, and the conversions between them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

NORM_TOL = 1e-9


class InvalidOpinion(ValueError):
    pass


@dataclass(frozen=True)
class DirichletParams:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float).reshape(-1)
        if a.size < 2:
            raise InvalidOpinion("need at least two classes")
        if not np.all(np.isfinite(a)):
            raise InvalidOpinion("concentration parameters must be finite")
        if np.any(a < 1.0):
            raise InvalidOpinion(f"concentration parameters must be >= 1, got min {a.min()!r}")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def k(self) -> int:
        return self.alpha.size

    @property
    def strength(self) -> float:
        return float(self.alpha.sum())

    @property
    def evidence(self) -> np.ndarray:
        return self.alpha - 1.0


@dataclass(frozen=True)
class SubjectiveOpinion:
    """Belief masses per class plus one uncertainty mass, summing to one.

    ``uncertainty == 0`` (a dogmatic opinion) is representable so that total
    conflict can be detected, but it has no finite Dirichlet counterpart.
    """

    belief: np.ndarray
    uncertainty: float

    def __post_init__(self):
        b = np.array(self.belief, dtype=float).reshape(-1)
        u = float(self.uncertainty)
        if b.size < 2:
            raise InvalidOpinion("need at least two classes")
        if not (np.all(np.isfinite(b)) and np.isfinite(u)):
            raise InvalidOpinion("masses must be finite")
        if np.any(b < 0.0) or u < 0.0:
            raise InvalidOpinion("masses must be non-negative")
        total = u + b.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidOpinion(f"masses sum to {total!r}, expected 1")
        b.setflags(write=False)
        object.__setattr__(self, "belief", b)
        object.__setattr__(self, "uncertainty", u)

    @property
    def k(self) -> int:
        return self.belief.size

    @classmethod
    def vacuous(cls, k: int) -> SubjectiveOpinion:
        return cls(np.zeros(k), 1.0)

    def to_json(self) -> dict[str, Any]:
        return {"belief": [float(v) for v in self.belief], "uncertainty": float(self.uncertainty)}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SubjectiveOpinion:
        try:
            return cls(obj["belief"], obj["uncertainty"])
        except (KeyError, TypeError) as exc:
            raise InvalidOpinion(f"malformed opinion object: {obj!r}") from exc


def opinion_from_dirichlet(d: DirichletParams) -> SubjectiveOpinion:
    s = d.strength
    return SubjectiveOpinion(d.evidence / s, d.k / s)


def dirichlet_from_opinion(o: SubjectiveOpinion, k: int | None = None) -> DirichletParams:
    k = o.k if k is None else k
    if k != o.k:
        raise InvalidOpinion(f"opinion has {o.k} classes, expected {k}")
    if o.uncertainty <= 0.0:
        raise InvalidOpinion("zero uncertainty corresponds to infinite Dirichlet strength")
    strength = k / o.uncertainty
    return DirichletParams(o.belief * strength + 1.0)


def expected_probabilities(d: DirichletParams) -> np.ndarray:
    return d.alpha / d.strength


# Batched forms used on the training path: rows are samples.

def opinions_from_alpha(alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(N, K) alpha -> (N, K) belief, (N,) uncertainty."""
    s = alpha.sum(axis=-1)
    return (alpha - 1.0) / s[..., None], alpha.shape[-1] / s


def alpha_from_opinions(belief: np.ndarray, u: np.ndarray) -> np.ndarray:
    k = belief.shape[-1]
    return belief * (k / u)[..., None] + 1.0
