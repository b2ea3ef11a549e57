"""Per-view evidential networks, the fused multi-view model, and training.

Each view has a small MLP (affine -> activation -> ... -> affine -> softplus)
whose output is evidence; alpha = evidence + 1. The hidden activation is ReLU
by default, tanh optional. View opinions are fused left to
right, the optional pseudo-view (concatenated features) last. Gradients are
hand-derived through every stage, fusion included.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from . import loss as L
from .fusion import combine_arrays, combine_arrays_backward
from .opinion import SubjectiveOpinion, alpha_from_opinions, opinions_from_alpha
from .special import DomainError

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class NumericalFailure(ArithmeticError):
    pass


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, h: (z > 0.0).astype(float)),
    "tanh": (np.tanh, lambda z, h: 1.0 - h * h),
}


def default_hidden(d_in: int) -> list[int]:
    return [max(64, d_in // 2)]


@dataclass
class EvidentialNet:
    weights: list[np.ndarray]  # (out, in) per layer
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @classmethod
    def init(cls, widths: Sequence[int], rng: np.random.Generator, activation: str = "relu") -> EvidentialNet:
        weights, biases = [], []
        for d_in, d_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(d_in)
            weights.append(rng.uniform(-bound, bound, size=(d_out, d_in)))
            biases.append(rng.uniform(-bound, bound, size=d_out))
        return cls(weights, biases, activation)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def d_in(self) -> int:
        return self.weights[0].shape[1]

    @property
    def k(self) -> int:
        return self.weights[-1].shape[0]

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, x: np.ndarray):
        """x: (N, d_in) -> (alpha (N, K), cache)."""
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ValueError(f"expected input width {self.d_in}, got shape {x.shape}")
        act = _ACTIVATIONS[self.activation][0]
        acts = [x]
        pre = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            pre.append(z)
            h = act(z) if i < last else softplus(z)
            if i < last:
                acts.append(h)
        return h + 1.0, (acts, pre)

    def backward(self, cache, grad_alpha: np.ndarray) -> list[np.ndarray]:
        """Gradients in :meth:`params` order given d(loss)/d(alpha)."""
        acts, pre = cache
        dact = _ACTIVATIONS[self.activation][1]
        g = grad_alpha * sigmoid(pre[-1])
        grads = []
        for i in range(len(self.weights) - 1, -1, -1):
            grads.append(g.sum(axis=0))
            grads.append(g.T @ acts[i])
            if i > 0:
                g = (g @ self.weights[i]) * dact(pre[i - 1], acts[i])
        return grads[::-1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "activation": self.activation,
            "layers": [
                {"shape": list(w.shape), "weights": w.ravel().tolist(), "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ]
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> EvidentialNet:
        weights = [np.array(l["weights"], dtype=float).reshape(l["shape"]) for l in obj["layers"]]
        biases = [np.array(l["bias"], dtype=float) for l in obj["layers"]]
        return cls(weights, biases, obj.get("activation", "relu"))


def forward_view(net: EvidentialNet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return net.forward(x[None, :])[0][0]
    return net.forward(x)[0]


@dataclass
class TmcModel:
    nets: list[EvidentialNet]
    k: int
    pseudo: EvidentialNet | None = None

    @property
    def etmc(self) -> bool:
        return self.pseudo is not None

    @property
    def view_widths(self) -> list[int]:
        return [n.d_in for n in self.nets]

    @classmethod
    def build(
        cls,
        view_widths: Sequence[int],
        k: int,
        etmc: bool = False,
        hidden: Sequence[int] | None = None,
        activation: str = "relu",
        seed: int = 0,
    ) -> TmcModel:
        rng = np.random.default_rng(seed)

        def widths(d):
            return [d, *(default_hidden(d) if hidden is None else hidden), k]

        nets = [EvidentialNet.init(widths(d), rng, activation) for d in view_widths]
        pseudo = EvidentialNet.init(widths(sum(view_widths)), rng, activation) if etmc else None
        return cls(nets, k, pseudo)

    def all_nets(self) -> list[EvidentialNet]:
        return self.nets + ([self.pseudo] if self.pseudo is not None else [])

    def params(self) -> list[np.ndarray]:
        return [p for net in self.all_nets() for p in net.params()]

    def _inputs(self, xs: Sequence[np.ndarray]) -> list[np.ndarray]:
        if len(xs) != len(self.nets):
            raise ValueError(f"model has {len(self.nets)} views, got {len(xs)}")
        xs = [np.atleast_2d(np.asarray(x, dtype=float)) for x in xs]
        if self.pseudo is not None:
            xs = xs + [np.concatenate(xs, axis=1)]
        return xs

    def forward(self, xs: Sequence[np.ndarray]):
        """Returns (per-view alphas, fused belief, fused u, fused alpha, cache)."""
        inputs = self._inputs(xs)
        alphas, caches = [], []
        for net, x in zip(self.all_nets(), inputs):
            a, c = net.forward(x)
            alphas.append(a)
            caches.append(c)
        ops = [opinions_from_alpha(a) for a in alphas]
        b, u = ops[0]
        steps = []
        for b2, u2 in ops[1:]:
            nb, nu, denom = combine_arrays(b, u, b2, u2)
            steps.append((b, u, b2, u2, nb, nu, denom))
            b, u = nb, nu
        fused_alpha = alpha_from_opinions(b, u)
        return alphas, b, u, fused_alpha, (caches, ops, steps)

    def loss_and_grads(self, xs, y: np.ndarray, lam: float):
        """Mean over the batch of fused + per-view (+ pseudo) losses, and its gradient."""
        y = np.asarray(y, dtype=int)
        n = len(y)
        alphas, b, u, fused_alpha, (caches, ops, steps) = self.forward(xs)
        total = L.batch_loss(fused_alpha, y, lam).sum()
        for a in alphas:
            total += L.batch_loss(a, y, lam).sum()
        total /= n

        # fused alpha -> fused opinion
        g_alpha = L.batch_loss_grad(fused_alpha, y, lam) / n
        k = self.k
        g_b = g_alpha * (k / u)[:, None]
        g_u = -(g_alpha * b).sum(axis=1) * k / u**2

        # unwind the fold
        g_ops = [None] * len(ops)
        for i in range(len(steps) - 1, -1, -1):
            b1, u1, b2, u2, nb, nu, denom = steps[i]
            gb1, gu1, gb2, gu2 = combine_arrays_backward(b1, u1, b2, u2, nb, nu, denom, g_b, g_u)
            g_ops[i + 1] = (gb2, gu2)
            g_b, g_u = gb1, gu1
        g_ops[0] = (g_b, g_u)

        grads = []
        for net, cache, a, (ob, ou), (gb, gu) in zip(self.all_nets(), caches, alphas, ops, g_ops):
            s = a.sum(axis=1)
            q = (gb * ob).sum(axis=1) + gu * ou
            ga = (gb - q[:, None]) / s[:, None]
            ga += L.batch_loss_grad(a, y, lam) / n
            grads.extend(net.backward(cache, ga))
        return float(total), grads

    def batch_loss(self, xs, y, lam: float) -> float:
        y = np.asarray(y, dtype=int)
        alphas, _, _, fused_alpha, _ = self.forward(xs)
        # every head shares K, so one stacked call covers fused and per-view terms
        stacked = np.concatenate([fused_alpha, *alphas])
        total = L.batch_loss(stacked, np.tile(y, len(alphas) + 1), lam).sum()
        return float(total / len(y))

    def forward_fused(self, xs):
        """Single sample: (per-view opinions, fused opinion, fused alpha)."""
        alphas, b, u, fused_alpha, (_, ops, _) = self.forward([np.asarray(x)[None, :] for x in xs])
        views = [SubjectiveOpinion(ob[0], ou[0]) for ob, ou in ops]
        return views, SubjectiveOpinion(b[0], u[0]), fused_alpha[0]

    def predict(self, xs):
        """Batched: (predicted class (N,), fused belief (N, K), fused u (N,), expected probs (N, K))."""
        _, b, u, fused_alpha, _ = self.forward(xs)
        probs = fused_alpha / fused_alpha.sum(axis=1, keepdims=True)
        return np.argmax(probs, axis=1), b, u, probs

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": CHECKPOINT_VERSION,
            "k": self.k,
            "etmc": self.etmc,
            "view_widths": self.view_widths,
            "nets": [n.to_dict() for n in self.nets],
            "pseudo": self.pseudo.to_dict() if self.pseudo is not None else None,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> TmcModel:
        if obj.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {obj.get('format_version')!r}")
        nets = [EvidentialNet.from_dict(n) for n in obj["nets"]]
        pseudo = EvidentialNet.from_dict(obj["pseudo"]) if obj.get("pseudo") else None
        model = cls(nets, int(obj["k"]), pseudo)
        if any(n.k != model.k for n in model.all_nets()):
            raise ValueError("checkpoint nets disagree on class count")
        return model


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 100
    lr: float = 3e-3
    weight_decay: float = 1e-4
    anneal_epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.lr <= 0 or self.weight_decay < 0:
            raise ValueError(f"invalid training config: {self}")
        if self.anneal_epochs <= 0:
            raise ValueError("anneal_epochs must be positive")


@dataclass
class Adam:
    params: list[np.ndarray]
    lr: float = 3e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if self.weight_decay:
                g = g + self.weight_decay * p
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    train_accuracy: float | None = None
    config: dict[str, Any] = field(default_factory=dict)


def train(model: TmcModel, dataset, cfg: TrainConfig) -> TrainReport:
    """Minimise the multi-task objective with Adam; mutates ``model`` in place."""
    if list(dataset.view_widths) != model.view_widths:
        raise ValueError(f"dataset view widths {dataset.view_widths} != model {model.view_widths}")
    report = TrainReport(config=asdict(cfg))
    if cfg.epochs == 0:
        return report
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.params(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    sched = L.AnnealSchedule(cfg.anneal_epochs)
    n = dataset.n
    for epoch in range(cfg.epochs):
        lam = L.anneal_lambda(epoch, sched)
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                value, grads = model.loss_and_grads([v[idx] for v in dataset.views], dataset.labels[idx], lam)
            except DomainError as exc:
                raise NumericalFailure(f"non-finite Dirichlet parameters at epoch {epoch}: {exc}") from exc
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise NumericalFailure(f"non-finite loss or gradient at epoch {epoch}, batch starting {start}")
            opt.step(grads)
            running += value * len(idx)
        report.epoch_losses.append(running / n)
        log.debug("epoch %d lambda %.3f loss %.6f", epoch, lam, report.epoch_losses[-1])
    pred = model.predict(dataset.views)[0]
    report.train_accuracy = float(np.mean(pred == dataset.labels))
    return report
