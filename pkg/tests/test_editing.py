import math

import numpy as np
import pytest

from latentedit.directions import AttributeDirection
from latentedit.editing import DEFAULT_ALPHAS, EditSpec, LayerMask, edit_latent, multi_edit, sweep
from latentedit.errors import ShapeMismatch
from latentedit.generator import sample_latent


def rand_dir(seed, shape=(4, 16)):
    v = np.random.Generator(np.random.PCG64(seed)).standard_normal(shape)
    return AttributeDirection(v / np.linalg.norm(v), 0.25)


def test_layer_mask_default():
    assert LayerMask.default(18).included == frozenset(range(8))
    assert LayerMask.default(4).included == frozenset({0, 1})
    assert LayerMask.default(1).included == frozenset({0})


def test_layer_mask_parse():
    assert LayerMask.parse("0-2,5", 8).included == frozenset({0, 1, 2, 5})
    assert LayerMask.parse("all", 3) == LayerMask.full(3)
    assert LayerMask.parse("default", 18) == LayerMask.default(18)
    with pytest.raises(ValueError):
        LayerMask.parse("0-9", 4)
    with pytest.raises(ValueError):
        LayerMask(frozenset(), 4)


def test_alpha_zero_identity():
    w = sample_latent(1)
    out = edit_latent(w, EditSpec(rand_dir(2), 0.0, LayerMask.default(4)))
    assert np.array_equal(out, w) and out is not w


def test_additive_inverse():
    w, d, m = sample_latent(1), rand_dir(3), LayerMask.full(4)
    back = edit_latent(edit_latent(w, EditSpec(d, 2.7, m)), EditSpec(d, -2.7, m))
    assert np.max(np.abs(back - w)) <= 1e-12


def test_hand_example():
    a = np.array([[1.0, 0.0], [0.0, 1.0]]) / math.sqrt(2)
    out = edit_latent(np.zeros((2, 2)), EditSpec(AttributeDirection(a), 2.0, LayerMask({0}, 2)))
    np.testing.assert_allclose(out, [[math.sqrt(2), 0.0], [0.0, 0.0]], rtol=1e-15)


def test_composition():
    w, d = sample_latent(5), rand_dir(6)
    for m in (LayerMask.full(4), LayerMask.default(4)):
        two = edit_latent(edit_latent(w, EditSpec(d, 1.25, m)), EditSpec(d, -3.5, m))
        one = edit_latent(w, EditSpec(d, -2.25, m))
        assert np.max(np.abs(two - one)) <= 1e-12


@pytest.mark.parametrize("rows", [{0}, {1, 3}, {0, 1, 2}])
def test_masked_rows_bit_identical(rows):
    w = sample_latent(7)
    out = edit_latent(w, EditSpec(rand_dir(8), 4.0, LayerMask(rows, 4)))
    for r in range(4):
        if r in rows:
            assert not np.array_equal(out[r], w[r])
        else:
            assert np.array_equal(out[r], w[r])


def test_logit_shift():
    w, d = sample_latent(9), rand_dir(10)
    logit = lambda v: np.vdot(d.a, v) + d.b
    full = edit_latent(w, EditSpec(d, 3.0, LayerMask.full(4)))
    assert abs(logit(full) - (logit(w) + 3.0)) <= 1e-12
    m = LayerMask.default(4)
    part = edit_latent(w, EditSpec(d, 3.0, m))
    frac = float(np.sum(d.a[m.rows()] ** 2))
    assert abs(logit(part) - (logit(w) + 3.0 * frac)) <= 1e-12


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        edit_latent(np.zeros((3, 16)), EditSpec(rand_dir(1), 1.0, LayerMask.full(4)))
    with pytest.raises(ShapeMismatch):
        edit_latent(sample_latent(1), EditSpec(rand_dir(1), 1.0, LayerMask.full(5)))
    with pytest.raises(ValueError):
        EditSpec(rand_dir(1), math.inf, LayerMask.full(4))


def test_sweep():
    w, d, m = sample_latent(2), rand_dir(3), LayerMask.default(4)
    assert np.array_equal(sweep(w, d, [0.0], m)[0], w)
    out = sweep(w, d, DEFAULT_ALPHAS, m)
    assert len(out) == 4 and DEFAULT_ALPHAS == (-5.0, -3.0, 3.0, 5.0)
    for al, c in zip(DEFAULT_ALPHAS, out):
        assert np.array_equal(c, edit_latent(w, EditSpec(d, al, m)))
    with pytest.raises(ValueError):
        sweep(w, d, [], m)


def test_multi_edit():
    w, m = sample_latent(4), LayerMask.default(4)
    s1, s2 = EditSpec(rand_dir(1), 1.5, m), EditSpec(rand_dir(2), -2.0, m)
    assert np.array_equal(multi_edit(w, []), w)
    assert np.max(np.abs(multi_edit(w, [s1, s2]) - multi_edit(w, [s2, s1]))) <= 1e-12
    neg = EditSpec(s1.direction, -s1.alpha, m)
    assert np.max(np.abs(multi_edit(w, [s1, neg]) - w)) <= 1e-12


@pytest.mark.parametrize("fixture", ["lin", "mlp"])
def test_semantic_monotonicity_full_mask(fixture, request):
    gen = request.getfixturevalue(fixture)
    d = AttributeDirection(gen.planted)
    alphas = np.linspace(-5, 5, 11)
    for k in range(10):
        w = sample_latent(300 + k, gen.latent_shape)
        s = [gen.statistic(gen.generate(c)) for c in sweep(w, d, alphas, LayerMask.full(4))]
        assert np.all(np.diff(s) > 0)
