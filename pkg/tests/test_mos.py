import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from codemos.exceptions import ArgumentError
from codemos.gradcheck import max_rel_error, numeric_grad
from codemos.mos import (
    BottleneckConfig,
    MixtureOfSoftmaxes,
    MosParams,
    bottleneck_report,
    fit_output_layer,
    format_report,
    log_softmax,
    mos_loss_and_grad,
    mos_probs,
    numerical_rank,
    parse_report,
    single_loss_and_grad,
    softmax_probs,
    synthetic_truth,
)

from ._oracles import mos_probs_loop

seeds = st.integers(0, 2**32 - 1)


def random_mos(rng, V=5, d=3, d_g=4, M=3, scale=1.0):
    return MosParams(
        rng.normal(0, scale, (V, d)), rng.normal(0, scale, (M, d, d_g)), rng.normal(0, scale, (M, d_g))
    )


def test_softmax_uniform_and_hand_case():
    np.testing.assert_allclose(softmax_probs(np.ones(2), np.zeros((4, 2))), 0.25, atol=1e-15)
    W = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    h = np.array([0.5, -1.0])
    z = [0.5, -1.0, -0.5]
    s = sum(math.exp(v) for v in z)
    np.testing.assert_allclose(softmax_probs(h, W), [math.exp(v) / s for v in z], atol=1e-15)


@given(seeds, st.floats(-50, 50))
def test_softmax_shift_invariance(seed, c):
    rng = np.random.default_rng(seed)
    h, W = rng.normal(size=3), rng.normal(size=(6, 3))
    # a constant logit shift is an extra hidden unit with an all-ones output column
    hx = np.append(h, c)
    Wx = np.hstack([W, np.ones((6, 1))])
    np.testing.assert_allclose(softmax_probs(hx, Wx), softmax_probs(h, W), rtol=0, atol=1e-12)


def test_mos_single_component():
    rng = np.random.default_rng(0)
    p = random_mos(rng, M=1)
    g = rng.normal(size=4)
    np.testing.assert_allclose(mos_probs(g, p), softmax_probs(np.tanh(p.W_h[0] @ g), p.W), atol=1e-12)


def test_mos_identical_components():
    rng = np.random.default_rng(1)
    p = random_mos(rng, M=3)
    p.W_h[:] = p.W_h[0]
    g = rng.normal(size=4)
    np.testing.assert_allclose(mos_probs(g, p), softmax_probs(np.tanh(p.W_h[0] @ g), p.W), atol=1e-12)


@given(seeds)
def test_mos_matches_loop_and_is_convex(seed):
    rng = np.random.default_rng(seed)
    p = random_mos(rng, V=4, M=2)
    g = rng.normal(size=4)
    q = mos_probs(g, p)
    np.testing.assert_allclose(q, mos_probs_loop(g, p.W, p.W_h, p.w_pi), atol=1e-12)
    assert q.sum() == pytest.approx(1.0, abs=1e-9) and (q >= 0).all()
    comps = np.array([softmax_probs(np.tanh(p.W_h[k] @ g), p.W) for k in range(2)])
    assert (q >= comps.min(axis=0) - 1e-12).all() and (q <= comps.max(axis=0) + 1e-12).all()


def test_mos_param_validation():
    with pytest.raises(ArgumentError):
        MosParams(np.zeros((4, 2)), np.zeros((2, 3, 4)), np.zeros((2, 4)))
    with pytest.raises(ArgumentError):
        mos_probs(np.zeros(3), random_mos(np.random.default_rng(0)))


def test_numerical_rank_examples():
    assert numerical_rank(np.eye(4), 1e-8) == 4
    u, v = np.arange(1, 5.0), np.arange(2, 7.0)
    assert numerical_rank(np.outer(u, v)) == 1
    assert numerical_rank(np.zeros((3, 3))) == 0


@given(seeds, st.integers(1, 4))
def test_factorization_rank_bound(seed, d):
    rng = np.random.default_rng(seed)
    H, W = rng.normal(size=(12, d)), rng.normal(size=(10, d))
    assert numerical_rank(H @ W.T) <= d


def test_log_softmax_rank_bound_over_seeds():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        H, W = rng.normal(size=(16, 2)), rng.normal(size=(16, 2))
        L = log_softmax(H @ W.T)
        assert numerical_rank(L) <= 3
        assert numerical_rank(L - L.mean(axis=1, keepdims=True)) <= 2


@pytest.mark.parametrize("seed", range(4))
def test_single_gradient(seed):
    rng = np.random.default_rng(seed)
    log_p = synthetic_truth(5, 6, 3, seed)
    H, W = rng.normal(size=(5, 2)), rng.normal(size=(6, 2))
    _, grads = single_loss_and_grad(log_p, H, W)
    num = numeric_grad(lambda: single_loss_and_grad(log_p, H, W)[0], [H, W])
    assert max_rel_error(grads, num) < 1e-4


@pytest.mark.parametrize("seed", range(4))
def test_mos_gradient(seed):
    rng = np.random.default_rng(seed)
    log_p = synthetic_truth(5, 6, 3, seed)
    p = random_mos(rng, V=6, d=2, d_g=3, M=3)
    G = rng.normal(size=(5, 3))
    arrays = [G, p.W, p.W_h, p.w_pi]
    _, grads = mos_loss_and_grad(log_p, *arrays)
    num = numeric_grad(lambda: mos_loss_and_grad(log_p, *arrays)[0], arrays)
    assert max_rel_error(grads, num) < 1e-4


def test_realizable_truth_fits():
    rng = np.random.default_rng(0)
    truth = log_softmax(rng.normal(size=(8, 2)) @ rng.normal(size=(8, 2)).T)
    assert fit_output_layer("single", truth, 2, iters=3000).kl < 1e-3


def test_identical_rows_fit_with_d1():
    row = log_softmax(np.random.default_rng(2).normal(size=6))
    truth = np.tile(row, (5, 1))
    assert fit_output_layer("single", truth, 1, iters=2000).kl < 1e-4
    assert fit_output_layer("mos", truth, 1, n_mix=2, iters=2000).kl < 1e-4


def test_fit_validation():
    with pytest.raises(ArgumentError):
        fit_output_layer("single", np.zeros((3, 3)), 2, iters=1)
    truth = synthetic_truth(4, 4, 2)
    with pytest.raises(ArgumentError):
        fit_output_layer("deep", truth, 2, iters=1)
    with pytest.raises(ArgumentError):
        fit_output_layer("single", truth, 2, iters=1, schedule="linear")


def test_sufficient_dimension_both_converge():
    cfg = BottleneckConfig(n_contexts=8, v_out=8, d=3, truth_rank=2, mixtures=(2,), iters=3000,
                           restarts=1, seeds=(1,))
    single, mos = bottleneck_report(cfg)
    assert max(single.kl, mos.kl) < 1e-4
    assert single.kl <= 2 * mos.kl + 1e-4 and mos.kl <= 2 * single.kl + 1e-4


def test_report_round_trip():
    cfg = BottleneckConfig(n_contexts=6, v_out=5, d=2, truth_rank=3, mixtures=(2, 3), iters=50,
                           restarts=1, seeds=(3, 4))
    recs = bottleneck_report(cfg)
    text = format_report(recs)
    assert text.startswith("#rank-v1\n#seed 3\n")
    assert parse_report(text) == recs
    assert format_report(parse_report(text)) == text
    with pytest.raises(ArgumentError):
        parse_report("garbage\n")


def test_estimator():
    truth = synthetic_truth(8, 8, 4, seed=0)
    single = MixtureOfSoftmaxes(dim=2, max_iter=800).fit(truth)
    mix = MixtureOfSoftmaxes(n_components=3, dim=2, context_dim=8, max_iter=800).fit(truth)
    assert single.rank() <= 3
    np.testing.assert_allclose(mix.predict_proba().sum(axis=1), 1.0, atol=1e-9)
    assert mix.score(truth) == pytest.approx(-mix.kl_)
    params = clone(mix).get_params()
    assert params["n_components"] == 3 and params["n_restarts"] == 1
