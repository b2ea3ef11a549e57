import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, stats

from tmvc.loss import (
    AnnealSchedule,
    adjusted_params,
    anneal_lambda,
    expected_nll,
    kl_to_uniform,
    sample_loss,
    sample_loss_grad,
)
from tmvc.opinion import DirichletParams

PI2_6 = math.pi**2 / 6


def kl_oracle(alpha):
    """KL(Dir(alpha) || Dir(1..1)) = -H(Dir(alpha)) - log Gamma(K)."""
    k = len(alpha)
    return -stats.dirichlet.entropy(np.asarray(alpha, float)) - math.lgamma(k)


def nll_oracle_beta(a, b):
    """E[-log mu_0] for mu_0 ~ Beta(a, b), by quadrature."""
    dist = stats.beta(a, b)
    val, _ = integrate.quad(lambda x: -math.log(x) * dist.pdf(x), 0, 1, limit=200)
    return val


def test_expected_nll_examples():
    assert expected_nll(DirichletParams([2, 1, 1]), 0) == pytest.approx(5 / 6, abs=1e-12)
    assert expected_nll(DirichletParams([1, 1]), 0) == pytest.approx(1.0, abs=1e-12)
    assert expected_nll(DirichletParams([1e6, 1, 1]), 0) < 1e-5


def test_expected_nll_accepts_onehot():
    assert expected_nll([2, 1, 1], [1, 0, 0]) == expected_nll([2, 1, 1], 0)
    with pytest.raises(ValueError):
        expected_nll([2, 1, 1], [1, 1, 0])
    with pytest.raises(ValueError):
        expected_nll([2, 1, 1], 3)


@pytest.mark.parametrize("a, b", [(2.0, 1.0), (1.0, 1.0), (3.5, 7.25), (20.0, 2.0)])
def test_expected_nll_matches_quadrature(a, b):
    assert expected_nll([a, b], 0) == pytest.approx(nll_oracle_beta(a, b), rel=1e-8)


def test_kl_examples():
    assert kl_to_uniform([1, 1, 1]) == 0.0
    assert kl_to_uniform([1, 2, 1]) == pytest.approx(math.log(3) - 5 / 6, abs=1e-12)
    assert kl_to_uniform([2, 2]) == pytest.approx(math.log(6) - 5 / 3, abs=1e-12)


@pytest.mark.parametrize("alpha", [[1, 2, 1], [2, 2], [1.5, 3.0, 7.0, 1.0], [40.0, 1.0, 1.0]])
def test_kl_matches_entropy_oracle(alpha):
    assert kl_to_uniform(alpha) == pytest.approx(kl_oracle(alpha), rel=1e-9, abs=1e-12)


def test_adjusted_params():
    np.testing.assert_array_equal(adjusted_params([3, 5, 2], 1), [3, 1, 2])
    np.testing.assert_array_equal(adjusted_params([1, 1], 0), [1, 1])
    np.testing.assert_array_equal(adjusted_params([1, 1], 1), [1, 1])
    np.testing.assert_array_equal(adjusted_params(DirichletParams([41, 2, 2]), 0), [1, 2, 2])


def test_sample_loss_examples():
    d = DirichletParams([2, 1, 1])
    assert sample_loss(d, 0, 0.0) == expected_nll(d, 0)
    assert sample_loss(d, 0, 1.0) == pytest.approx(5 / 6, abs=1e-12)
    assert sample_loss([1, 2, 1], 0, 1.0) == pytest.approx(11 / 6 + math.log(3) - 5 / 6, abs=1e-12)


def test_gradient_symbolic_two_class():
    g = sample_loss_grad([1.0, 1.0], 0, 0.0)
    # d/d alpha of psi(S) - psi(alpha_0) with S = alpha_0 + alpha_1
    np.testing.assert_allclose(g, [PI2_6 - 1 - PI2_6, PI2_6 - 1], rtol=1e-12)


def test_increasing_true_evidence_lowers_nll():
    for k in (2, 3, 10):
        base = np.ones(k)
        assert sample_loss_grad(base, 0, 0.0)[0] < 0
        bumped = base.copy()
        bumped[0] += 1e-3
        assert expected_nll(bumped, 0) < expected_nll(base, 0)


def central_diff(f, x, h):
    g = np.empty_like(x)
    for i in range(x.size):
        up, dn = x.copy(), x.copy()
        up[i] += h[i]
        dn[i] -= h[i]
        g[i] = (f(up) - f(dn)) / (2 * h[i])
    return g


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        k = int(rng.integers(2, 8))
        alpha = rng.uniform(1.0, 50.0, size=k)
        # keep the stencil inside the domain alpha >= 1
        alpha = np.maximum(alpha, 1.0 + 1e-3)
        y = int(rng.integers(k))
        lam = float(rng.uniform())
        g = sample_loss_grad(alpha, y, lam)
        fd = central_diff(lambda a: sample_loss(a, y, lam), alpha, 1e-5 * alpha)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)


def test_anneal_schedule():
    sched = AnnealSchedule(50)
    assert anneal_lambda(0, sched) == 0.0
    assert anneal_lambda(50, sched) == 1.0
    assert anneal_lambda(25, sched) == 0.5
    assert anneal_lambda(500, sched) == 1.0
    lams = [anneal_lambda(e, AnnealSchedule(7)) for e in range(30)]
    assert all(b >= a for a, b in zip(lams, lams[1:]))
    with pytest.raises(ValueError):
        AnnealSchedule(0)


alpha_vectors = st.integers(2, 8).flatmap(
    lambda k: arrays(np.float64, k, elements=st.floats(1.0, 200.0, allow_nan=False))
)


@settings(max_examples=300)
@given(alpha_vectors)
def test_kl_nonnegative_and_zero_only_at_ones(alpha):
    kl = kl_to_uniform(alpha)
    if np.all(alpha == 1.0):
        assert abs(kl) <= 1e-12
    else:
        assert kl > 0.0 or np.allclose(alpha, 1.0, atol=1e-6)


@settings(max_examples=200)
@given(alpha_vectors, st.data())
def test_nll_permutation_invariant(alpha, data):
    y = data.draw(st.integers(0, alpha.size - 1))
    perm = np.array(data.draw(st.permutations(range(alpha.size))))
    inv = np.argsort(perm)
    assert expected_nll(alpha[perm], int(inv[y])) == pytest.approx(expected_nll(alpha, y), rel=1e-12, abs=1e-14)


@settings(max_examples=200)
@given(alpha_vectors, st.data(), st.floats(0.0, 1.0))
def test_small_step_along_negative_gradient_descends(alpha, data, lam):
    alpha = alpha + 0.5  # stay off the boundary alpha = 1
    y = data.draw(st.integers(0, alpha.size - 1))
    g = sample_loss_grad(alpha, y, lam)
    norm = np.linalg.norm(g)
    if norm < 1e-8:
        return
    step = 1e-4 * g / norm
    trial = np.maximum(alpha - step, 1.0)
    assert sample_loss(trial, y, lam) < sample_loss(alpha, y, lam)
