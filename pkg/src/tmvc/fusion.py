"""Reduced Dempster-Shafer combination of K-class subjective opinions.

Two opinions (b1, u1) and (b2, u2) combine as

    b_k = (b1_k b2_k + b1_k u2 + b2_k u1) / (1 - C)
    u   = u1 u2 / (1 - C)

with conflict C = sum_{i != j} b1_i b2_j. Because both inputs are normalised,
1 - C equals the sum of the unnormalised outputs; that form is used here since
it is free of cancellation and keeps the result normalised by construction.

The ``check_prop_*`` helpers evaluate the accuracy and uncertainty guarantees
of the rule on concrete pairs. The property tests drive them with random draws.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .opinion import SubjectiveOpinion

CONFLICT_EPS = 1e-12


class TotalConflict(ArithmeticError):
    """Raised when 1 - C is too small to normalise the combined masses."""


class PreconditionUnmet(ValueError):
    pass


def combine_arrays(b1, u1, b2, u2, check: bool = True):
    """Batched combine. b*: (..., K); u*: (...). Returns (b, u, one_minus_conflict)."""
    num = b1 * b2 + b1 * u2[..., None] + b2 * u1[..., None]
    uu = u1 * u2
    denom = num.sum(axis=-1) + uu
    if check and np.any(denom <= CONFLICT_EPS):
        raise TotalConflict("total conflict between opinions (1 - C <= 1e-12)")
    return num / denom[..., None], uu / denom, denom


def combine_arrays_backward(b1, u1, b2, u2, b, u, denom, grad_b, grad_u):
    """Vector-Jacobian product of :func:`combine_arrays`.

    Returns gradients with respect to (b1, u1, b2, u2).
    """
    q = (grad_b * b).sum(axis=-1) + grad_u * u
    g_num = (grad_b - q[..., None]) / denom[..., None]
    g_uu = (grad_u - q) / denom
    gb1 = g_num * (b2 + u2[..., None])
    gb2 = g_num * (b1 + u1[..., None])
    gu1 = (g_num * b2).sum(axis=-1) + g_uu * u2
    gu2 = (g_num * b1).sum(axis=-1) + g_uu * u1
    return gb1, gu1, gb2, gu2


def conflict(o1: SubjectiveOpinion, o2: SubjectiveOpinion) -> float:
    return float(o1.belief.sum() * o2.belief.sum() - o1.belief @ o2.belief)


def combine(o1: SubjectiveOpinion, o2: SubjectiveOpinion) -> SubjectiveOpinion:
    if o1.k != o2.k:
        raise ValueError(f"class counts differ: {o1.k} vs {o2.k}")
    b, u, _ = combine_arrays(o1.belief, np.float64(o1.uncertainty), o2.belief, np.float64(o2.uncertainty))
    return SubjectiveOpinion(b, float(u))


def combine_all(opinions: Sequence[SubjectiveOpinion]) -> SubjectiveOpinion:
    """Left fold of :func:`combine` over the opinions in view order."""
    if not opinions:
        raise ValueError("need at least one opinion")
    out = opinions[0]
    for o in opinions[1:]:
        out = combine(out, o)
    return out


def check_prop_accuracy_gain(o_orig: SubjectiveOpinion, o_add: SubjectiveOpinion, t: int) -> bool:
    """Fusing an opinion that backs class ``t`` at least as strongly as the
    original's top belief never lowers the belief in ``t``."""
    if o_add.belief[t] < o_orig.belief.max():
        raise PreconditionUnmet("added belief in target must be >= largest original belief")
    fused = combine(o_orig, o_add)
    return bool(fused.belief[t] >= o_orig.belief[t] - 1e-12)


def degradation_bound(o_orig: SubjectiveOpinion, o_add: SubjectiveOpinion, t: int) -> float:
    """Upper bound on the drop b_t^o - b_t; zero once u^a reaches one."""
    uo, ua = o_orig.uncertainty, o_add.uncertainty
    slack = 1.0 - ua
    return float(o_orig.belief[t] * (1.0 + uo) * slack / (1.0 + uo * slack))


def check_prop_degradation_bound(o_orig: SubjectiveOpinion, o_add: SubjectiveOpinion, t: int) -> float:
    """Return the measured drop b_t^o - b_t after fusion; it must not exceed
    :func:`degradation_bound`."""
    fused = combine(o_orig, o_add)
    drop = float(o_orig.belief[t] - fused.belief[t])
    bound = degradation_bound(o_orig, o_add, t)
    if drop > bound + 1e-12:
        raise AssertionError(f"degradation {drop!r} exceeds bound {bound!r}")
    return drop


def _with_uncertainty(o: SubjectiveOpinion, u: float) -> SubjectiveOpinion:
    total = o.belief.sum()
    shape = o.belief / total if total > 0 else np.zeros_like(o.belief)
    return SubjectiveOpinion(shape * (1.0 - u), u)


def check_prop_uncertainty(o_orig: SubjectiveOpinion, o_add: SubjectiveOpinion, steps: int = 8) -> bool:
    """Fused u never exceeds either input's u, and grows with u^o when the
    belief proportions of the original are held fixed."""
    fused = combine(o_orig, o_add)
    if fused.uncertainty > min(o_orig.uncertainty, o_add.uncertainty) + 1e-12:
        return False
    prev = -np.inf
    for uo in np.linspace(o_orig.uncertainty, 1.0, steps):
        u = combine(_with_uncertainty(o_orig, float(uo)), o_add).uncertainty
        if u < prev - 1e-12:
            return False
        prev = u
    return True
