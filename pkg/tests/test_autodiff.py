"""Engine tests: forward examples, FD gradient checks per operator, optimizers."""
from __future__ import annotations

import numpy as np
import pytest

from pspot import autodiff as ad
from pspot.autodiff import Value

from helpers import check_gradients

SEEDS = [0, 1, 2, 3, 4]


def leaf(rng, shape, scale=1.0, positive=False):
    data = rng.normal(size=shape) * scale
    if positive:
        data = np.abs(data) + 0.5
    return Value(data, requires_grad=True)


# -- forward examples --------------------------------------------------------

def test_matmul_identity():
    a = Value(np.arange(12.0).reshape(3, 4))
    out = ad.matmul(Value(np.eye(3)), a)
    assert np.array_equal(out.data, a.data)


def test_softmax_symmetry():
    out = ad.softmax(Value([[0.0, 0.0]]))
    assert np.allclose(out.data, [[0.5, 0.5]])


def test_softmax_normalized():
    rng = np.random.default_rng(7)
    out = ad.softmax(Value(rng.normal(size=(5, 9))), axis=1)
    assert np.all(out.data >= 0)
    assert np.allclose(out.data.sum(axis=1), 1.0, atol=1e-9)


def test_conv2d_mean_kernel_constant_map():
    x = Value(np.full((6, 6, 1), 3.0))
    k = Value(np.full((3, 3, 1, 1), 1.0 / 9.0))
    out = ad.conv2d(x, k, padding="valid")
    assert out.shape == (4, 4, 1)
    assert np.allclose(out.data, 3.0)


def test_square_gradient():
    x = Value(3.0, requires_grad=True)
    (x * x).backward()
    assert np.allclose(x.grad, 6.0)


def test_softmax_cross_entropy_symmetric_point():
    logits = Value(np.zeros((1, 2)), requires_grad=True)
    nll = -ad.gather(ad.log_softmax(logits, axis=1), [0], axis=1)
    ad.sum_(nll).backward()
    assert np.allclose(logits.grad, [[-0.5, 0.5]])


def test_matmul_sum_matches_finite_differences():
    rng = np.random.default_rng(0)
    a = leaf(rng, (3, 4))
    b = leaf(rng, (4, 2))
    check_gradients(lambda: ad.sum_(ad.matmul(a, b)), [a, b], eps=1e-4, rtol=1e-4)


def test_shape_mismatch_reports_both_shapes():
    with pytest.raises(ad.ShapeMismatch) as err:
        ad.matmul(Value(np.zeros((2, 3))), Value(np.zeros((2, 3))))
    assert "(2, 3)" in str(err.value)


def test_nonscalar_loss_rejected():
    with pytest.raises(ad.NonScalarLoss):
        Value(np.zeros(3), requires_grad=True).backward()


def test_reused_value_accumulates_both_paths():
    x = Value(2.0, requires_grad=True)
    y = x * x + x * 3.0
    y.backward()
    assert np.allclose(x.grad, 2 * 2.0 + 3.0)


def test_determinism_bit_identical():
    def run():
        rng = np.random.default_rng(42)
        a = leaf(rng, (4, 4))
        out = ad.mean(ad.tanh(ad.matmul(a, a)))
        out.backward()
        return out.item(), a.grad.copy()

    v1, g1 = run()
    v2, g2 = run()
    assert v1 == v2
    assert np.array_equal(g1, g2)


def test_no_grad_blocks_graph():
    x = Value(1.0, requires_grad=True)
    with ad.no_grad():
        y = x * 2.0
    assert not y.requires_grad


# -- gradient oracle per operator --------------------------------------------

@pytest.mark.parametrize("seed", SEEDS)
def test_grad_add_broadcast(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (4, 8, 8, 8))
    b = leaf(rng, (8, 1, 8))
    check_gradients(lambda: ad.sum_((a + b) * 0.5), [a, b])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_mul_sub_div(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (3, 5))
    b = leaf(rng, (3, 5), positive=True)
    check_gradients(lambda: ad.sum_(a * b - a / b), [a, b])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_matmul(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (4, 6))
    b = leaf(rng, (6, 3))
    check_gradients(lambda: ad.sum_(ad.tanh(ad.matmul(a, b))), [a, b])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_conv2d(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (6, 7, 2))
    k = leaf(rng, (3, 3, 2, 3), scale=0.5)
    b = leaf(rng, (3,))
    check_gradients(lambda: ad.sum_(ad.conv2d(x, k, bias=b, padding="same") ** 2.0),
                    [x, k, b])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_conv2d_strided_valid(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (7, 7, 2))
    k = leaf(rng, (3, 3, 2, 2), scale=0.5)
    check_gradients(lambda: ad.sum_(ad.conv2d(x, k, stride=2, padding="valid")), [x, k])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_max_pool2d(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (6, 8, 3))
    check_gradients(lambda: ad.sum_(ad.max_pool2d(x, (2, 2)) ** 2.0), [x])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_sigmoid_tanh_relu(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (4, 5))
    check_gradients(lambda: ad.sum_(ad.sigmoid(x) + ad.tanh(x)), [x])
    y = leaf(rng, (4, 5))
    check_gradients(lambda: ad.sum_(ad.relu(y) * y), [y])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_exp_log_sqrt(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (3, 4), positive=True)
    check_gradients(lambda: ad.sum_(ad.log(x) + ad.exp(x * 0.1) + ad.sqrt(x)), [x])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_softmax_log_softmax(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (3, 7))
    w = np.random.default_rng(seed + 100).normal(size=(3, 7))
    check_gradients(lambda: ad.sum_(ad.softmax(x, axis=1) * w), [x])
    check_gradients(lambda: ad.sum_(ad.log_softmax(x, axis=1) * w), [x])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_concat_gather(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (3, 4))
    b = leaf(rng, (2, 4))
    idx = [0, 2, 2, 4]
    check_gradients(lambda: ad.sum_(ad.gather(ad.concat([a, b], axis=0), idx, axis=0) ** 2.0),
                    [a, b])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_gather_axis1(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (4, 6))
    check_gradients(lambda: ad.sum_(ad.gather(a, [1, 1, 5], axis=1)), [a])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_sum_mean_axes(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (4, 8, 8, 8))
    w = np.random.default_rng(seed + 5).normal(size=(4, 1, 8, 8))
    check_gradients(lambda: ad.sum_(ad.mean(x, axis=1, keepdims=True) * w), [x])
    check_gradients(lambda: ad.mean(x) * 2.0, [x])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_reshape_transpose(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (3, 4, 2))
    w = np.random.default_rng(seed + 9).normal(size=(2, 12))
    check_gradients(
        lambda: ad.sum_(ad.reshape(ad.transpose(x, (2, 0, 1)), (2, 12)) * w), [x])


# -- optimizers ---------------------------------------------------------------

def test_adam_zero_gradient_keeps_params():
    p = Value(np.array([1.0, -2.0]), requires_grad=True)
    opt = ad.Adam({"p": p}, lr=0.1)
    opt.step()
    assert np.array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_magnitude():
    for g in (0.3, -4.0, 1e-3):
        p = Value(np.array([0.0]), requires_grad=True)
        opt = ad.Adam({"p": p}, lr=1e-2)
        p.grad = np.array([g])
        opt.step()
        expected = 1e-2 * abs(g) / (abs(g) + 1e-8)
        assert np.allclose(abs(p.data[0]), expected, rtol=1e-6)
        assert p.grad is None


def test_sgd_exact_update():
    p = Value(np.array([1.0, 2.0]), requires_grad=True)
    opt = ad.SGD({"p": p}, lr=0.5)
    p.grad = np.array([2.0, -2.0])
    opt.step()
    assert np.array_equal(p.data, [0.0, 3.0])


def test_clip_global_norm():
    a = Value(np.zeros(3), requires_grad=True)
    b = Value(np.zeros(4), requires_grad=True)
    a.grad = np.full(3, 3.0)
    b.grad = np.full(4, 4.0)
    norm = ad.clip_global_norm({"a": a, "b": b}, 5.0)
    total = np.sqrt((a.grad ** 2).sum() + (b.grad ** 2).sum())
    assert norm > 5.0
    assert np.allclose(total, 5.0)


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    params = {"w": rng.normal(size=(3, 2)), "b": rng.normal(size=(2,))}
    vals = {k: Value(v.copy(), requires_grad=True) for k, v in params.items()}
    opt = ad.Adam(vals, lr=3e-4)
    for v in vals.values():
        v.grad = np.ones_like(v.data)
    opt.step()
    path = tmp_path / "model.ckpt"
    ad.save_checkpoint(path, {k: v.data for k, v in vals.items()}, opt.state,
                       meta={"note": "test"})
    loaded, opt_state, meta = ad.load_checkpoint(path)
    assert meta["note"] == "test"
    assert opt_state.step_count == 1 and opt_state.algo == "adam"
    for k in vals:
        assert np.array_equal(loaded[k], vals[k].data)
        assert np.array_equal(opt_state.m[k], opt.state.m[k])
    with open(path, "rb") as f:
        assert f.read(14) == b"pspot-ckpt-v1\n"


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ad.BadCheckpoint):
        ad.load_checkpoint(path)
