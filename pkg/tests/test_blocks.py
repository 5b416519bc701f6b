import numpy as np
import pytest

from rawtfnet.errors import ConfigError
from rawtfnet.nn import ResBlock, SERes2Block
from rawtfnet.tensor import Rng

from conftest import GRAD_SEEDS, assert_gradients
from oracles import naive_bn_train, naive_conv2d


def _randomize(block, rng):
    for _, layer, key in block.named_parameters():
        layer.params[key][...] = rng.standard_normal(layer.params[key].shape) * 0.5


def _zero(block):
    for _, layer, key in block.named_parameters():
        layer.params[key][...] = 0.0


def test_seres2_zero_body_is_relu_of_input():
    block = SERes2Block(8, 8, Rng(0), scale=4, pool=None)
    _zero(block)
    x = np.random.default_rng(0).standard_normal((2, 8, 5, 6))
    np.testing.assert_allclose(block.forward(x, train=True), np.maximum(x, 0))


def test_resblock_zero_body_is_relu_of_input():
    block = ResBlock(4, 4, Rng(0), pool=None)
    _zero(block)
    x = np.random.default_rng(1).standard_normal((2, 4, 3, 5))
    np.testing.assert_allclose(block.forward(x, train=True), np.maximum(x, 0))


def test_scale_one_is_plain_dws_block():
    rng = np.random.default_rng(2)
    block = SERes2Block(4, 8, Rng(1), scale=1, pool=None)
    _randomize(block, rng)
    x = rng.standard_normal((2, 4, 5, 6))
    h = block.relu1.forward(block.bn1.forward(block.pw1.forward(x, True), True))
    dws = block.res2_0
    h = dws.relu.forward(dws.bn.forward(dws.dw.forward(h, True), True))
    h = block.se.forward(block.bn2.forward(block.pw2.forward(h, True), True))
    ref = np.maximum(h + block.proj.forward(x), 0)
    np.testing.assert_allclose(block.forward(x, train=True), ref, atol=1e-12)
    assert len(block.hier) == 1


def test_indivisible_scale_rejected():
    with pytest.raises(ConfigError):
        SERes2Block(8, 10, Rng(0), scale=4)


def _bn(x, layer):
    return naive_bn_train(x, layer.params["gamma"], layer.params["beta"], layer.eps)


def test_seres2_straight_line_reference():
    rng = np.random.default_rng(3)
    block = SERes2Block(8, 8, Rng(2), scale=4, dilation=2, se_reduction=4, pool=(1, 2))
    _randomize(block, rng)
    x = rng.standard_normal((2, 8, 6, 6))
    p = {name: layer.params for name, layer in block.named_layers()}

    h1 = naive_conv2d(x, p["pw1"]["weight"])
    h2 = _bn(h1, block.bn1)
    h3 = np.maximum(h2, 0)
    g = [h3[:, 2 * i:2 * i + 2] for i in range(4)]
    y = [g[0]]
    for i in range(1, 4):
        u = g[i] + y[i - 1]
        conv = naive_conv2d(u, p[f"res2_{i - 1}.dw"]["weight"], padding=(2, 2), dilation=(2, 2), groups=2)
        y.append(np.maximum(_bn(conv, block.hier[i - 1].bn), 0))
    cat = np.concatenate(y, axis=1)
    h4 = _bn(naive_conv2d(cat, p["pw2"]["weight"]), block.bn2)
    s = h4.mean(axis=(2, 3))
    z = np.maximum(s @ p["se.fc1"]["weight"].T + p["se.fc1"]["bias"], 0)
    gate = 1 / (1 + np.exp(-(z @ p["se.fc2"]["weight"].T + p["se.fc2"]["bias"])))
    h5 = h4 * gate[:, :, None, None]
    out = np.maximum(h5 + x, 0)
    ref = np.empty((2, 8, 6, 3))
    for idx in np.ndindex(2, 8, 6, 3):
        n, c, f, t = idx
        ref[idx] = max(out[n, c, f, 2 * t], out[n, c, f, 2 * t + 1])
    np.testing.assert_allclose(block.forward(x, train=True), ref, atol=1e-12)


def test_describe_shapes():
    block = SERes2Block(4, 8, Rng(0), pool=(1, 2))
    rows, shape = block.describe((4, 5, 10))
    assert shape == (8, 5, 5)
    assert sum(r[1] for r in rows) == sum(layer.params[k].size for _, layer, k in block.named_parameters())


@pytest.mark.parametrize("seed", GRAD_SEEDS)
def test_resblock_gradients(seed):
    rng = np.random.default_rng(seed)
    block = ResBlock(2, 4, Rng(seed), pool=(1, 2))
    _randomize(block, rng)
    assert_gradients(block, rng.standard_normal((2, 2, 3, 4)), rng)


@pytest.mark.parametrize("seed", GRAD_SEEDS)
@pytest.mark.parametrize("scale", [1, 4])
def test_seres2_gradients(seed, scale):
    rng = np.random.default_rng(seed)
    block = SERes2Block(4, 8, Rng(seed), scale=scale, se_reduction=4, pool=(1, 2))
    _randomize(block, rng)
    assert_gradients(block, rng.standard_normal((2, 4, 3, 4)), rng)
