import math

import numpy as np
import pytest

from latentedit.embedding import (
    AdamState,
    EmbedConfig,
    InitStrategy,
    LossWeights,
    RidgeEncoder,
    adam_step,
    embed,
    init_latent,
    loss_and_grad,
    perceptual_loss,
    pixel_mse,
    total_loss,
)
from latentedit.errors import MissingTarget, NonFiniteLoss, ShapeMismatch
from latentedit.generator import LinearGenerator, PatchFeatures, sample_latent
from oracles import central_diff, rel_err


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(0.0, 0.0)
    with pytest.raises(ValueError):
        LossWeights(-1.0, 1.0)


def test_adam_zero_grad():
    w = np.arange(4.0).reshape(2, 2)
    w2, st = adam_step(AdamState.fresh((2, 2)), np.zeros((2, 2)), w)
    assert np.array_equal(w2, w) and st.t == 1


def test_adam_first_step_scalar():
    w2, _ = adam_step(AdamState.fresh((1, 1)), np.ones((1, 1)), np.zeros((1, 1)))
    # m_hat = 1, v_hat = 1 at t = 1
    assert w2[0, 0] == pytest.approx(-0.01 / (1 + 1e-8), rel=1e-15)


def test_adam_sign_property(rng):
    g = rng.standard_normal((4, 16))
    w2, _ = adam_step(AdamState.fresh((4, 16)), g, np.zeros((4, 16)))
    assert np.all(np.sign(w2) == -np.sign(g))


def test_adam_matches_hand_recurrence(rng):
    grads = rng.standard_normal((5, 3, 2))
    st, w = AdamState.fresh((3, 2), eta=0.05, beta1=0.8, beta2=0.95, eps=1e-6), np.zeros((3, 2))
    m = v = np.zeros((3, 2))
    ref = np.zeros((3, 2))
    for t, g in enumerate(grads, start=1):
        w, st = adam_step(st, g, w)
        m = 0.8 * m + 0.2 * g
        v = 0.95 * v + 0.05 * g ** 2
        ref = ref - 0.05 * (m / (1 - 0.8 ** t)) / (np.sqrt(v / (1 - 0.95 ** t)) + 1e-6)
    np.testing.assert_allclose(w, ref, rtol=1e-14, atol=1e-16)
    assert st.t == 5 and np.all(st.v >= 0)


def test_adam_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        adam_step(AdamState.fresh((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


def test_perceptual_loss_examples(rng):
    ext = PatchFeatures(2)
    a = rng.random((8, 8, 3))
    b = rng.random((8, 8, 3))
    assert perceptual_loss(ext, a, a) == 0.0
    assert perceptual_loss(ext, np.zeros((8, 8, 3)), np.ones((8, 8, 3))) == 1.0
    assert perceptual_loss(ext, a, b) == perceptual_loss(ext, b, a)
    with pytest.raises(ShapeMismatch):
        perceptual_loss(ext, a, a[:4, :4])


def test_pixel_mse_examples():
    assert pixel_mse(np.ones((3, 3, 1)), np.ones((3, 3, 1))) == 0.0
    assert pixel_mse(np.zeros((4, 4, 3)), np.ones((4, 4, 3))) == 1.0
    a = np.zeros((2, 2, 1))
    b = a.copy()
    b[1, 0, 0] = 0.5
    assert pixel_mse(a, b) == 0.0625
    with pytest.raises(ShapeMismatch):
        pixel_mse(a, np.zeros((2, 2, 3)))


def test_total_loss_properties(rng, ext):
    a, b = rng.random((2, 16, 16, 3))
    mse_only = total_loss(LossWeights(0.0, 2.0), ext, a, b, 4, 16)
    assert mse_only == 2.0 * pixel_mse(a, b)
    assert total_loss(LossWeights(), ext, a, a, 4, 16) == 0.0
    one = total_loss(LossWeights(0.7, 1.3), ext, a, b, 4, 16)
    two = total_loss(LossWeights(1.4, 2.6), ext, a, b, 4, 16)
    assert two == pytest.approx(2 * one, rel=1e-15)
    assert one >= 0


def test_loss_and_grad_agrees_with_total_loss(rng, ext):
    a, b = rng.random((2, 16, 16, 3))
    loss, grad = loss_and_grad(LossWeights(0.5, 2.0), ext, a, b, 8, 16)
    assert loss == pytest.approx(total_loss(LossWeights(0.5, 2.0), ext, a, b, 8, 16), rel=1e-14)
    fd = central_diff(lambda x: total_loss(LossWeights(0.5, 2.0), ext, x, b, 8, 16), a)
    assert rel_err(fd, grad) <= 1e-6


@pytest.mark.parametrize("fixture", ["lin", "mlp"])
def test_backprop_parity(fixture, request, ext):
    gen = request.getfixturevalue(fixture)
    rng = np.random.Generator(np.random.PCG64(21))
    target = gen.generate(rng.standard_normal(gen.latent_shape))
    w = rng.standard_normal(gen.latent_shape)
    f = lambda v: total_loss(LossWeights(), ext, gen.generate(v), target, 16, 64)
    _, g_img = loss_and_grad(LossWeights(), ext, gen.generate(w), target, 16, 64)
    assert rel_err(central_diff(f, w), gen.vjp(w, g_img)) <= 1e-4


def test_init_random_and_mean(lin):
    r = init_latent(InitStrategy("random", seed=9), lin)
    assert np.array_equal(r, sample_latent(9, lin.latent_shape))
    m = init_latent(InitStrategy("mean_latent", seed=1, samples=10_000), lin)
    assert np.max(np.abs(m)) <= 0.05


def test_init_encoder_needs_target(lin):
    with pytest.raises(MissingTarget):
        init_latent(InitStrategy("encoder"), lin)
    with pytest.raises(ValueError):
        InitStrategy("resnet")
    with pytest.raises(ValueError):
        InitStrategy("mean_latent", samples=0)


def test_encoder_recovers_clean_latent(lin):
    w0 = sample_latent(77, lin.latent_shape)
    w = RidgeEncoder()(lin, lin.generate(w0))
    # ridge shrinkage is tiny relative to A^T A
    np.testing.assert_allclose(w, w0, atol=1e-3)


def test_encoder_rejects_nonlinear(mlp):
    with pytest.raises(TypeError):
        RidgeEncoder()(mlp, np.zeros((64, 64, 3)))


def test_encoder_beats_random_init(lin, ext):
    enc, rnd = [], []
    for k in range(20):
        tgt = lin.generate(sample_latent(500 + k, lin.latent_shape))
        for strat, acc in ((InitStrategy("encoder"), enc), (InitStrategy("random", seed=900 + k), rnd)):
            w = init_latent(strat, lin, tgt)
            acc.append(total_loss(LossWeights(), ext, lin.generate(w), tgt, 16, 64))
    assert np.mean(enc) < np.mean(rnd)


def test_embed_from_optimum(lin, ext):
    w0 = sample_latent(4, lin.latent_shape)
    res = embed(lin.generate(w0), lin, ext, EmbedConfig(iterations=5), w_init=w0)
    assert res.loss_trace[0] == 0.0
    assert np.array_equal(res.w_star, w0)
    assert res.best_loss == 0.0


def test_embed_contract_nonconvex(mlp, ext):
    target = mlp.generate(sample_latent(31, mlp.latent_shape))
    cfg = EmbedConfig(iterations=300, init=InitStrategy("random", seed=5), eta=0.5)
    res = embed(target, mlp, ext, cfg)
    assert res.iterations_run == 300 and res.loss_trace.shape == (300,)
    assert res.best_loss == res.loss_trace.min()
    # large step size makes the trace non-monotone, exercising best-loss tracking
    assert np.any(np.diff(res.loss_trace) > 0)
    assert res.best_loss < res.loss_trace[-1]
    again = total_loss(cfg.weights, ext, mlp.generate(res.w_star), target, *cfg.sizes(64))
    assert abs(again - res.best_loss) <= 1e-12
    running = np.minimum.accumulate(res.loss_trace)
    assert np.all(np.diff(running) <= 0)


def test_embed_deterministic(lin, ext):
    target = lin.generate(sample_latent(2, lin.latent_shape))
    cfg = EmbedConfig(iterations=50, init=InitStrategy("random", seed=3))
    a, b = embed(target, lin, ext, cfg), embed(target, lin, ext, cfg)
    assert np.array_equal(a.w_star, b.w_star)
    assert np.array_equal(a.loss_trace, b.loss_trace)


def test_embed_single_iteration(lin, ext):
    res = embed(lin.generate(sample_latent(2, lin.latent_shape)), lin, ext, EmbedConfig(iterations=1))
    assert res.loss_trace.shape == (1,)
    with pytest.raises(ValueError):
        EmbedConfig(iterations=0)


class _NaNAfter:
    """Wraps a generator and poisons its output from call ``k`` on."""

    def __init__(self, gen, k):
        self.gen, self.k, self.calls = gen, k, 0
        self.latent_shape, self.out_size = gen.latent_shape, gen.out_size

    def generate(self, w):
        self.calls += 1
        img = self.gen.generate(w)
        return img * math.nan if self.calls > self.k else img

    def vjp(self, w, u):
        return self.gen.vjp(w, u)


def test_embed_nonfinite_aborts(lin, ext):
    target = lin.generate(sample_latent(2, lin.latent_shape))
    with pytest.raises(NonFiniteLoss) as err:
        embed(target, _NaNAfter(lin, 3), ext, EmbedConfig(iterations=10))
    assert err.value.iteration == 3


def test_embed_small_world_recovers(small_lin):
    target = small_lin.generate(sample_latent(8, small_lin.latent_shape))
    res = embed(target, small_lin, PatchFeatures(2), EmbedConfig(iterations=1000))
    assert pixel_mse(small_lin.generate(res.w_star), target) <= 1e-6
