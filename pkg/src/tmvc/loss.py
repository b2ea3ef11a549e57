"""Variational Dirichlet objective and its analytic gradient.

For concentration ``alpha`` and true class ``t`` the per-sample loss is

    expected_nll(alpha, t) + lam * KL(Dir(alpha_tilde) || Dir(1, ..., 1))

where ``alpha_tilde`` is ``alpha`` with the true-class entry reset to one.
Everything is phrased as a loss to minimise. The batched functions take
``alpha`` of shape (N, K) and integer labels of shape (N,).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .opinion import DirichletParams
from .special import digamma, log_gamma, trigamma


@dataclass(frozen=True)
class AnnealSchedule:
    anneal_epochs: int = 50

    def __post_init__(self):
        if self.anneal_epochs <= 0:
            raise ValueError("anneal_epochs must be positive")


def anneal_lambda(epoch: int, sched: AnnealSchedule = AnnealSchedule()) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return min(1.0, epoch / sched.anneal_epochs)


def _label_index(y, k: int) -> int:
    arr = np.asarray(y)
    if arr.ndim == 0:
        t = int(arr)
    else:
        if arr.shape != (k,) or not np.all((arr == 0) | (arr == 1)) or arr.sum() != 1:
            raise ValueError("label must be a class index or a one-hot vector")
        t = int(np.argmax(arr))
    if not 0 <= t < k:
        raise ValueError(f"label {t} out of range for {k} classes")
    return t


def _as_alpha(d) -> np.ndarray:
    return d.alpha if isinstance(d, DirichletParams) else np.asarray(d, dtype=float)


def adjusted_params(d, y) -> np.ndarray:
    alpha = _as_alpha(d).copy()
    alpha[_label_index(y, alpha.size)] = 1.0
    return alpha


# --- batched -----------------------------------------------------------------

def _onehot(y: np.ndarray, k: int) -> np.ndarray:
    return np.eye(k)[y]


def batch_expected_nll(alpha: np.ndarray, y: np.ndarray) -> np.ndarray:
    s = alpha.sum(axis=1)
    a_t = alpha[np.arange(len(y)), y]
    return digamma(s) - digamma(a_t)


def batch_kl_to_uniform(alpha_tilde: np.ndarray) -> np.ndarray:
    k = alpha_tilde.shape[1]
    s = alpha_tilde.sum(axis=1)
    return (
        log_gamma(s)
        - log_gamma(float(k))
        - log_gamma(alpha_tilde).sum(axis=1)
        + ((alpha_tilde - 1.0) * (digamma(alpha_tilde) - digamma(s)[:, None])).sum(axis=1)
    )


def batch_loss(alpha: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    if not lam:
        return batch_expected_nll(alpha, y)
    # same terms as batch_expected_nll + lam * batch_kl_to_uniform, with the
    # special-function calls merged into one array each
    n, k = alpha.shape
    mask = _onehot(y, k)
    at = mask + (1.0 - mask) * alpha
    s, st = alpha.sum(axis=1), at.sum(axis=1)
    psi = digamma(np.concatenate([s, alpha[np.arange(n), y], st, at.ravel()]))
    psi_s, psi_t, psi_st, psi_at = psi[:n], psi[n:2 * n], psi[2 * n:3 * n], psi[3 * n:].reshape(n, k)
    lg = log_gamma(np.concatenate([st, at.ravel()]))
    kl = (lg[:n] - log_gamma(float(k)) - lg[n:].reshape(n, k).sum(axis=1)
          + ((at - 1.0) * (psi_at - psi_st[:, None])).sum(axis=1))
    return psi_s - psi_t + lam * kl


def batch_loss_grad(alpha: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """d(batch_loss)/d(alpha), row by row."""
    n, k = alpha.shape
    s = alpha.sum(axis=1)
    grad = np.repeat(trigamma(s)[:, None], k, axis=1)
    rows = np.arange(n)
    grad[rows, y] -= trigamma(alpha[rows, y])
    if lam:
        mask = _onehot(y, k)
        at = mask + (1.0 - mask) * alpha
        st = at.sum(axis=1)
        g_kl = (at - 1.0) * trigamma(at) - ((st - k) * trigamma(st))[:, None]
        grad += lam * (1.0 - mask) * g_kl
    return grad


# --- per-sample --------------------------------------------------------------

def expected_nll(d, y) -> float:
    alpha = _as_alpha(d)
    t = _label_index(y, alpha.size)
    return float(batch_expected_nll(alpha[None, :], np.array([t]))[0])


def kl_to_uniform(alpha_tilde) -> float:
    at = np.asarray(alpha_tilde, dtype=float)
    if np.any(at < 1.0):
        raise ValueError("adjusted parameters must be >= 1")
    return float(batch_kl_to_uniform(at[None, :])[0])


def sample_loss(d, y, lam: float) -> float:
    alpha = _as_alpha(d)
    t = _label_index(y, alpha.size)
    return float(batch_loss(alpha[None, :], np.array([t]), lam)[0])


def sample_loss_grad(d, y, lam: float) -> np.ndarray:
    alpha = _as_alpha(d)
    t = _label_index(y, alpha.size)
    return batch_loss_grad(alpha[None, :], np.array([t]), lam)[0]
