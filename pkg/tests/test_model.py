import math

import numpy as np
import pytest

from tmvc import loss as L
from tmvc.data import make_blobs, split
from tmvc.fusion import combine_all
from tmvc.model import EvidentialNet, NumericalFailure, TmcModel, TrainConfig, forward_view, train
from tmvc.opinion import opinion_from_dirichlet, DirichletParams


def zero_output(net):
    net.weights[-1][:] = 0.0
    net.biases[-1][:] = 0.0
    return net


def net_emitting(alpha, d_in=3):
    """Net whose output is the constant ``alpha`` (bias-only final layer)."""
    rng = np.random.default_rng(0)
    net = zero_output(EvidentialNet.init([d_in, 4, len(alpha)], rng))
    e = np.asarray(alpha, float) - 1.0
    # inverse softplus
    net.biases[-1][:] = np.log(np.expm1(e))
    return net


def test_zero_final_layer_gives_ln2_evidence():
    net = zero_output(EvidentialNet.init([5, 8, 3], np.random.default_rng(1)))
    np.testing.assert_allclose(forward_view(net, np.ones(5)), 1.0 + math.log(2.0), rtol=1e-15)


def test_alpha_at_least_one():
    rng = np.random.default_rng(2)
    for act in ("relu", "tanh"):
        net = EvidentialNet.init([6, 16, 4], rng, act)
        alpha = forward_view(net, rng.normal(scale=50.0, size=(200, 6)))
        assert np.all(alpha >= 1.0)


def test_width_mismatch():
    net = EvidentialNet.init([3, 4, 2], np.random.default_rng(0))
    with pytest.raises(ValueError):
        forward_view(net, np.ones(4))


def test_single_view_fused_equals_view():
    m = TmcModel.build([3], 2, hidden=[4], seed=0)
    x = np.random.default_rng(0).normal(size=(7, 3))
    alphas, b, u, fused_alpha, _ = m.forward([x])
    np.testing.assert_allclose(fused_alpha, alphas[0], rtol=1e-12)


def test_vacuous_view_is_ignored():
    informative = net_emitting([35.0, 5.0])
    vacuous = net_emitting([1.0 + 1e-12, 1.0 + 1e-12])
    m = TmcModel([informative, vacuous], 2)
    views, fused, alpha = m.forward_fused([np.zeros(3), np.zeros(3)])
    np.testing.assert_allclose(alpha, [35.0, 5.0], rtol=1e-9)


def test_forward_fused_worked_example():
    # view opinions {b=[.6,.2],u=.2} and {b=[.7,.1],u=.2} correspond to alpha [7,3] and [8,2]
    m = TmcModel([net_emitting([7.0, 3.0]), net_emitting([8.0, 2.0])], 2)
    views, fused, alpha = m.forward_fused([np.zeros(3), np.zeros(3)])
    np.testing.assert_allclose(views[0].belief, [0.6, 0.2], atol=1e-12)
    np.testing.assert_allclose(fused.belief, [0.85, 0.10], atol=1e-12)
    assert fused.uncertainty == pytest.approx(0.05, abs=1e-12)
    np.testing.assert_allclose(alpha, [35.0, 5.0], rtol=1e-10)


def test_forward_matches_opinion_fold():
    m = TmcModel.build([3, 5, 2], 3, etmc=True, hidden=[6], seed=4)
    xs = [np.random.default_rng(i).normal(size=d) for i, d in enumerate([3, 5, 2])]
    views, fused, _ = m.forward_fused(xs)
    assert len(views) == 4
    ref = combine_all(views)
    np.testing.assert_allclose(fused.belief, ref.belief, atol=1e-12)


def test_batch_loss_single_view_is_twice_view_loss():
    m = TmcModel.build([3], 2, hidden=[4], seed=0)
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(5, 3)), rng.integers(0, 2, 5)
    a = m.forward([x])[0][0]
    for lam in (0.0, 0.7):
        per = L.batch_loss(a, y, lam).mean()
        assert m.batch_loss([x], y, lam) == pytest.approx(2 * per, rel=1e-12)


def test_batch_loss_compositional():
    m = TmcModel.build([3, 4], 3, etmc=True, hidden=[5], seed=2)
    rng = np.random.default_rng(3)
    xs = [rng.normal(size=(6, 3)), rng.normal(size=(6, 4))]
    y = rng.integers(0, 3, 6)
    lam = 0.4
    expected = 0.0
    for i in range(6):
        views, fused, fused_alpha = m.forward_fused([xs[0][i], xs[1][i]])
        expected += L.sample_loss(fused_alpha, int(y[i]), lam)
        for v in views:
            s = v.k / v.uncertainty
            expected += L.sample_loss(v.belief * s + 1.0, int(y[i]), lam)
    assert m.batch_loss(xs, y, lam) == pytest.approx(expected / 6, rel=1e-10)
    # lambda = 0 strips every KL term
    no_kl = 0.0
    for i in range(6):
        views, fused, fused_alpha = m.forward_fused([xs[0][i], xs[1][i]])
        no_kl += L.expected_nll(fused_alpha, int(y[i]))
        no_kl += sum(L.expected_nll(v.belief * (v.k / v.uncertainty) + 1.0, int(y[i])) for v in views)
    assert m.batch_loss(xs, y, 0.0) == pytest.approx(no_kl / 6, rel=1e-10)


def fd_check(model, xs, y, lam, h=1e-6, rtol=1e-4, atol=1e-7):
    _, grads = model.loss_and_grads(xs, y, lam)
    for p, g in zip(model.params(), grads):
        flat = p.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = model.batch_loss(xs, y, lam)
            flat[i] = old - h
            dn = model.batch_loss(xs, y, lam)
            flat[i] = old
            fd = (up - dn) / (2 * h)
            assert abs(gf[i] - fd) <= rtol * abs(fd) + atol, (gf[i], fd)


@pytest.mark.parametrize("etmc", [False, True])
@pytest.mark.parametrize("activation", ["relu", "tanh"])
def test_backprop_matches_finite_differences(etmc, activation):
    rng = np.random.default_rng(7)
    for trial in range(10):
        m = TmcModel.build([3, 4], 2, etmc=etmc, hidden=[4], activation=activation, seed=trial)
        xs = [rng.normal(size=(5, 3)), rng.normal(size=(5, 4))]
        y = rng.integers(0, 2, 5)
        fd_check(m, xs, y, float(rng.uniform()))


def test_deeper_net_backprop():
    rng = np.random.default_rng(11)
    m = TmcModel.build([3, 2, 4], 3, hidden=[5, 4], seed=0)
    xs = [rng.normal(size=(4, d)) for d in (3, 2, 4)]
    fd_check(m, xs, rng.integers(0, 3, 4), 1.0)


@pytest.fixture(scope="module")
def blob_split():
    return split(make_blobs(n=400, k=2, view_dims=(2, 2), separation=6.0, seed=0), 0.5, seed=0)


@pytest.fixture(scope="module")
def blobs(blob_split):
    return blob_split[0]


@pytest.fixture(scope="module")
def trained(blobs):
    m = TmcModel.build(blobs.view_widths, 2, seed=0)
    rep = train(m, blobs, TrainConfig(epochs=60, seed=0))
    return m, rep


def test_train_separable_blobs(blobs, trained):
    m, rep = trained
    assert rep.train_accuracy >= 0.95
    assert len(rep.epoch_losses) == 60
    # non-increasing trend over windows of 5 epochs
    w = np.array(rep.epoch_losses).reshape(-1, 5).mean(axis=1)
    assert np.all(np.diff(w[-6:]) <= 1e-3 * w[0])
    assert w[-1] < w[0]
    for net, x in zip(m.nets, blobs.views):
        assert np.all(forward_view(net, x) >= 1.0)


def test_predict_agrees_with_truth_on_held_out_points(blob_split, trained):
    m, _ = trained
    fresh = blob_split[1]
    pred = m.predict(fresh.views)[0]
    assert np.mean(pred == fresh.labels) >= 0.95


def test_dropping_a_view_never_lowers_uncertainty(blobs, trained):
    m, _ = trained
    full_u = m.predict(blobs.views)[2]
    ops = m.forward(blobs.views)[4][1]
    for keep in (0, 1):
        assert np.all(ops[keep][1] >= full_u - 1e-12)


def test_epochs_zero_leaves_model_unchanged(blobs):
    m = TmcModel.build(blobs.view_widths, 2, seed=3)
    before = [p.copy() for p in m.params()]
    rep = train(m, blobs, TrainConfig(epochs=0, seed=0))
    assert rep.epoch_losses == [] and rep.train_accuracy is None
    for a, b in zip(before, m.params()):
        np.testing.assert_array_equal(a, b)


def test_training_is_deterministic(blobs):
    params = []
    for _ in range(2):
        m = TmcModel.build(blobs.view_widths, 2, etmc=True, seed=5)
        train(m, blobs, TrainConfig(epochs=5, seed=9))
        params.append([p.copy() for p in m.params()])
    for a, b in zip(*params):
        assert a.tobytes() == b.tobytes()


def test_evidence_nonnegative_after_every_step(blobs):
    m = TmcModel.build(blobs.view_widths, 2, seed=1)
    for epoch in range(3):
        train(m, blobs, TrainConfig(epochs=1, seed=epoch, lr=0.05))
        for net, x in zip(m.nets, blobs.views):
            assert np.all(forward_view(net, x) >= 1.0)


def test_non_finite_loss_aborts(blobs):
    m = TmcModel.build(blobs.view_widths, 2, seed=1)
    m.nets[0].weights[0][0, 0] = np.nan
    with np.errstate(invalid="ignore"), pytest.raises(NumericalFailure):
        train(m, blobs, TrainConfig(epochs=1))


def test_predict_tie_breaks_to_lowest_index():
    m = TmcModel([net_emitting([4.0, 4.0])], 2)
    assert m.predict([np.zeros((1, 3))])[0][0] == 0
    m = TmcModel([net_emitting([41.0, 2.0, 2.0])], 3)
    assert m.predict([np.zeros((1, 3))])[0][0] == 0


def test_checkpoint_round_trip():
    m = TmcModel.build([3, 2], 3, etmc=True, hidden=[4], activation="tanh", seed=0)
    back = TmcModel.from_dict(m.to_dict())
    x = [np.ones((2, 3)), np.ones((2, 2))]
    np.testing.assert_array_equal(m.forward(x)[3], back.forward(x)[3])
    assert back.etmc and back.nets[0].activation == "tanh"
    bad = m.to_dict()
    bad["format_version"] = 99
    with pytest.raises(ValueError):
        TmcModel.from_dict(bad)


def test_opinion_of_constant_net():
    o = opinion_from_dirichlet(DirichletParams(forward_view(net_emitting([41.0, 2.0, 2.0]), np.zeros(3))))
    np.testing.assert_allclose(o.belief, [40 / 45, 1 / 45, 1 / 45], rtol=1e-9)
