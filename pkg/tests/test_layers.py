import numpy as np
import pytest

from rawtfnet.complexity import count_params
from rawtfnet.errors import StateError
from rawtfnet.nn import BatchNorm, Conv1d, Conv2d, Linear, MaxPool2d, MeanPool, ReLU, SEBlock
from rawtfnet.nn.base import Sequential, no_cache
from rawtfnet.nn.functional import sigmoid
from rawtfnet.tensor import Rng

from conftest import GRAD_SEEDS, assert_gradients
from oracles import naive_bn_eval, naive_bn_train, naive_conv2d


def test_conv2d_param_count():
    assert Conv2d(1, 32, 3, Rng(0)).param_count() == 288


def test_batchnorm_constant_input_gives_beta():
    bn = BatchNorm(3)
    bn.params["beta"][:] = [0.5, -1.0, 2.0]
    y = bn.forward(np.full((2, 3, 4, 5), 7.0), train=True)
    np.testing.assert_allclose(y, np.broadcast_to(bn.params["beta"][None, :, None, None], y.shape))


def test_batchnorm_train_normalizes():
    x = np.random.default_rng(0).standard_normal((4, 3, 5, 6)) * 3 + 2
    y = BatchNorm(3).forward(x, train=True)
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-4)
    np.testing.assert_allclose(y, naive_bn_train(x, np.ones(3), np.zeros(3), 1e-5), atol=1e-12)


def test_batchnorm_eval_hand_formula():
    rng = np.random.default_rng(1)
    bn = BatchNorm(4, eps=1e-3)
    for k, v in (("running_mean", rng.standard_normal(4)), ("running_var", rng.uniform(0.5, 2, 4))):
        bn.buffers[k] = v
    bn.params["gamma"] = rng.standard_normal(4)
    bn.params["beta"] = rng.standard_normal(4)
    x = rng.standard_normal((2, 4, 3, 3))
    ref = naive_bn_eval(x, bn.params["gamma"], bn.params["beta"], bn.buffers["running_mean"],
                        bn.buffers["running_var"], 1e-3)
    np.testing.assert_allclose(bn.forward(x, train=False), ref, atol=1e-12)


def test_batchnorm_running_stats_use_unbiased_variance():
    x = np.random.default_rng(2).standard_normal((2, 2, 3, 1))
    bn = BatchNorm(2, momentum=0.1)
    bn.forward(x, train=True)
    var = x.var(axis=(0, 2, 3), ddof=1)
    np.testing.assert_allclose(bn.buffers["running_var"], 0.9 + 0.1 * var)
    np.testing.assert_allclose(bn.buffers["running_mean"], 0.1 * x.mean(axis=(0, 2, 3)))


def test_relu_backward_mask():
    relu = ReLU()
    relu.forward(np.array([-1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(relu.backward(np.array([5.0, 5.0, 5.0])), [0.0, 0.0, 5.0])


def test_backward_before_forward_is_state_error():
    with pytest.raises(StateError):
        ReLU().backward(np.ones(2))
    relu = ReLU()
    with no_cache():
        relu.forward(np.ones(2))
    with pytest.raises(StateError):
        relu.backward(np.ones(2))


def test_se_zero_weights_halves_input():
    se = SEBlock(8, Rng(0), reduction=4)
    for _, layer, key in se.named_parameters():
        layer.params[key][...] = 0.0
    x = np.random.default_rng(0).standard_normal((2, 8, 3, 4))
    np.testing.assert_allclose(se.forward(x), 0.5 * x)


def test_se_scale_invariant_to_spatial_permutation():
    se = SEBlock(8, Rng(1), reduction=4)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1, 8, 3, 4))
    perm_f, perm_t = rng.permutation(3), rng.permutation(4)
    xp = x[:, :, perm_f][:, :, :, perm_t]
    np.testing.assert_allclose(se.forward(x)[:, :, perm_f][:, :, :, perm_t], se.forward(xp), atol=1e-14)


def test_se_staged_pipeline():
    se = SEBlock(16, Rng(2), reduction=8)
    rng = np.random.default_rng(2)
    for _, layer, key in se.named_parameters():
        layer.params[key][...] = rng.standard_normal(layer.params[key].shape)
    x = rng.standard_normal((2, 16, 5, 3))
    w1, b1 = se.fc1.params["weight"], se.fc1.params["bias"]
    w2, b2 = se.fc2.params["weight"], se.fc2.params["bias"]
    out = np.empty_like(x)
    for n in range(2):
        s = np.array([x[n, c].sum() / 15 for c in range(16)])
        hidden = np.array([max(0.0, w1[j] @ s + b1[j]) for j in range(2)])
        gate = np.array([1 / (1 + np.exp(-(w2[c] @ hidden + b2[c]))) for c in range(16)])
        out[n] = x[n] * gate[:, None, None]
    np.testing.assert_allclose(se.forward(x), out, atol=1e-12)


def test_se_param_count():
    assert count_params(SEBlock(64, Rng(0), reduction=8)) == 64 * 8 + 8 + 8 * 64 + 64


def test_sigmoid_symmetry():
    z = np.linspace(-30, 30, 13)
    np.testing.assert_allclose(sigmoid(z) + sigmoid(-z), 1.0)


def test_meanpool_and_linear_forward():
    x = np.random.default_rng(3).standard_normal((2, 3, 4))
    np.testing.assert_allclose(MeanPool(2, keepdims=False).forward(x), x.mean(axis=2))
    lin = Linear(4, 2, Rng(0))
    np.testing.assert_allclose(lin.forward(x[:, 0]), x[:, 0] @ lin.params["weight"].T)


def test_layer_forward_matches_naive_conv():
    rng = np.random.default_rng(4)
    conv = Conv2d(4, 6, (3, 2), Rng(4), stride=(2, 1), padding=(1, 0), dilation=(1, 2), groups=2, bias=True)
    conv.params["bias"][:] = rng.standard_normal(6)
    x = rng.standard_normal((2, 4, 6, 7))
    ref = naive_conv2d(x, conv.params["weight"], conv.params["bias"], (2, 1), (1, 0), (1, 2), 2)
    np.testing.assert_allclose(conv.forward(x), ref, atol=1e-12)


def test_state_dict_round_trip_and_strictness():
    net = Sequential(("conv", Conv2d(2, 2, 1, Rng(0))), ("bn", BatchNorm(2)))
    state = net.state_dict()
    other = Sequential(("conv", Conv2d(2, 2, 1, Rng(1))), ("bn", BatchNorm(2)))
    other.load_state_dict(state)
    assert all(np.array_equal(other.state_dict()[k], v) for k, v in state.items())
    with pytest.raises(StateError):
        other.load_state_dict({k: v for k, v in state.items() if k != "bn.gamma"})


# gradient checks, 5 seeds each

def _bn_layer(rng):
    bn = BatchNorm(3)
    bn.params["gamma"] = rng.uniform(0.5, 1.5, 3)
    bn.params["beta"] = rng.standard_normal(3)
    return bn


LAYER_CASES = {
    "conv2d_dense": (lambda r: Conv2d(2, 3, 3, Rng(0), padding=1, bias=True), (2, 2, 4, 4)),
    "conv2d_pointwise": (lambda r: Conv2d(3, 4, 1, Rng(0)), (2, 3, 3, 4)),
    "conv2d_depthwise": (lambda r: Conv2d(3, 3, 3, Rng(0), padding=2, dilation=2, groups=3), (2, 3, 4, 5)),
    "conv2d_strided": (lambda r: Conv2d(4, 2, 2, Rng(0), stride=2, groups=2), (1, 4, 5, 4)),
    "conv1d": (lambda r: Conv1d(3, 2, 3, Rng(0), padding=1), (2, 3, 7)),
    "batchnorm_train": (_bn_layer, (3, 3, 2, 3)),
    "linear": (lambda r: Linear(4, 3, Rng(0)), (5, 4)),
    "se": (lambda r: SEBlock(8, Rng(0), reduction=4), (2, 8, 3, 3)),
    "maxpool": (lambda r: MaxPool2d((1, 2)), (2, 2, 3, 6)),
}


@pytest.mark.parametrize("seed", GRAD_SEEDS)
@pytest.mark.parametrize("case", sorted(LAYER_CASES))
def test_layer_gradients(case, seed):
    rng = np.random.default_rng(seed)
    make, shape = LAYER_CASES[case]
    layer = make(rng)
    for _, lyr, key in layer.named_parameters():
        lyr.params[key][...] = rng.standard_normal(lyr.params[key].shape) * 0.5
    assert_gradients(layer, rng.standard_normal(shape), rng, tol=1e-5)


@pytest.mark.parametrize("seed", GRAD_SEEDS)
def test_batchnorm_eval_gradients(seed):
    rng = np.random.default_rng(seed)
    bn = _bn_layer(rng)
    bn.buffers["running_var"] = rng.uniform(0.5, 2, 3)
    assert_gradients(bn, rng.standard_normal((2, 3, 2, 2)), rng, train=False)
