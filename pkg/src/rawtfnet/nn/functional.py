"""Stateless forward/backward kernels on batch-first float64 arrays.

Convolutions are cross-correlations evaluated one kernel tap at a time: each
tap is a strided slice of the padded input multiplied by a (grouped) weight
matrix. This keeps memory at one input-sized temporary and lets 1x1 and
depthwise layers hit cheap fast paths.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError


def pair(v) -> tuple[int, int]:
    if isinstance(v, (int, np.integer)):
        return int(v), int(v)
    a, b = v
    return int(a), int(b)


def conv_output_size(size: int, kernel: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def _check_groups(cin, cout, cg, groups):
    if groups < 1 or cin % groups or cout % groups:
        raise ConfigError(f"channels ({cin} in, {cout} out) not divisible by groups={groups}")
    if cg != cin // groups:
        raise DimensionError(f"weight expects {cg * groups} input channels, input has {cin}")


def _tap_slice(i, j, dh, dw, sh, sw, ho, wo):
    return (
        slice(None),
        slice(None),
        slice(i * dh, i * dh + sh * (ho - 1) + 1, sh),
        slice(j * dw, j * dw + sw * (wo - 1) + 1, sw),
    )


def conv2d_forward(x, w, b=None, stride=1, padding=0, dilation=1, groups=1):
    """Grouped, strided, dilated 2D cross-correlation.

    x: (B, Cin, H, W) or (Cin, H, W); w: (Cout, Cin/groups, Kh, Kw).
    """
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"conv2d expects 4-d input/weight, got {x.shape} and {w.shape}")
    bsz, cin, h, wd = x.shape
    cout, cg, kh, kw = w.shape
    _check_groups(cin, cout, cg, groups)
    sh, sw = pair(stride)
    ph, pw = pair(padding)
    dh, dw = pair(dilation)
    ho = conv_output_size(h, kh, sh, ph, dh)
    wo = conv_output_size(wd, kw, sw, pw, dw)
    if ho < 1 or wo < 1:
        raise DimensionError(f"kernel {kh}x{kw} (dilation {dh},{dw}) does not fit input {h}x{wd}")
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    og = cout // groups

    if kh == kw == 1 and groups == 1 and sh == sw == 1:
        y = np.matmul(w.reshape(cout, cin), xp.reshape(bsz, cin, ho * wo)).reshape(bsz, cout, ho, wo)
    elif cg == 1 and og == 1:
        y = np.zeros((bsz, cout, ho, wo))
        for i in range(kh):
            for j in range(kw):
                xs = xp[_tap_slice(i, j, dh, dw, sh, sw, ho, wo)]
                y += xs * w[:, 0, i, j][None, :, None, None]
    else:
        w5 = w.reshape(groups, og, cg, kh, kw)
        y = np.zeros((bsz, groups, og, ho * wo))
        for i in range(kh):
            for j in range(kw):
                xs = xp[_tap_slice(i, j, dh, dw, sh, sw, ho, wo)].reshape(bsz, groups, cg, ho * wo)
                y += np.matmul(w5[:, :, :, i, j], xs)
        y = y.reshape(bsz, cout, ho, wo)
    if b is not None:
        y += b[None, :, None, None]
    return y[0] if squeeze else y


def conv2d_backward(gy, x, w, stride=1, padding=0, dilation=1, groups=1, need_input_grad=True):
    """Gradients of :func:`conv2d_forward` w.r.t. input, weight and bias."""
    squeeze = x.ndim == 3
    if squeeze:
        x, gy = x[None], gy[None]
    bsz, cin, h, wd = x.shape
    cout, cg, kh, kw = w.shape
    sh, sw = pair(stride)
    ph, pw = pair(padding)
    dh, dw = pair(dilation)
    _, _, ho, wo = gy.shape
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    og = cout // groups
    gb = gy.sum(axis=(0, 2, 3))
    gw = np.zeros_like(w)
    gxp = np.zeros_like(xp) if need_input_grad else None

    if kh == kw == 1 and groups == 1 and sh == sw == 1:
        g2 = gy.reshape(bsz, cout, ho * wo)
        x2 = xp.reshape(bsz, cin, ho * wo)
        gw[:, :, 0, 0] = np.tensordot(g2, x2, axes=([0, 2], [0, 2]))
        if need_input_grad:
            gxp = np.matmul(w.reshape(cout, cin).T, g2).reshape(xp.shape)
    elif cg == 1 and og == 1:
        for i in range(kh):
            for j in range(kw):
                sl = _tap_slice(i, j, dh, dw, sh, sw, ho, wo)
                gw[:, 0, i, j] = np.einsum("bchw,bchw->c", gy, xp[sl])
                if need_input_grad:
                    gxp[sl] += gy * w[:, 0, i, j][None, :, None, None]
    else:
        w5 = w.reshape(groups, og, cg, kh, kw)
        gw5 = gw.reshape(groups, og, cg, kh, kw)
        g4 = gy.reshape(bsz, groups, og, ho * wo)
        for i in range(kh):
            for j in range(kw):
                sl = _tap_slice(i, j, dh, dw, sh, sw, ho, wo)
                xs = xp[sl].reshape(bsz, groups, cg, ho * wo)
                gw5[:, :, :, i, j] = np.matmul(g4, xs.transpose(0, 1, 3, 2)).sum(axis=0)
                if need_input_grad:
                    gxs = np.matmul(w5[:, :, :, i, j].transpose(0, 2, 1), g4)
                    gxp[sl] += gxs.reshape(bsz, cin, ho, wo)
    gx = None
    if need_input_grad:
        gx = gxp[:, :, ph : ph + h, pw : pw + wd] if ph or pw else gxp
        if squeeze:
            gx = gx[0]
    return gx, gw, gb


def conv2d_macs(in_shape, w_shape, stride=1, padding=0, dilation=1, groups=1) -> int:
    """Multiply-accumulates: Cout * (Cin/groups) * Kh * Kw * Hout * Wout."""
    _, h, wd = in_shape
    cout, cg, kh, kw = w_shape
    ho = conv_output_size(h, kh, pair(stride)[0], pair(padding)[0], pair(dilation)[0])
    wo = conv_output_size(wd, kw, pair(stride)[1], pair(padding)[1], pair(dilation)[1])
    return cout * cg * kh * kw * ho * wo


def conv1d_forward(x, w, b=None, stride=1, padding=0, dilation=1, groups=1):
    """1D cross-correlation. x: (B, Cin, L) or (Cin, L); w: (Cout, Cin/groups, K)."""
    y = conv2d_forward(
        x[..., None, :], w[:, :, None, :], b, (1, stride), (0, padding), (1, dilation), groups
    )
    return y[..., 0, :]


def conv1d_backward(gy, x, w, stride=1, padding=0, dilation=1, groups=1, need_input_grad=True):
    gx, gw, gb = conv2d_backward(
        gy[..., None, :], x[..., None, :], w[:, :, None, :],
        (1, stride), (0, padding), (1, dilation), groups, need_input_grad,
    )
    return (gx[..., 0, :] if gx is not None else None), gw[:, :, 0, :], gb


def maxpool2d_forward(x, window, stride=None):
    """Max over each window; trailing partial windows are dropped.

    Returns the pooled map and the winning tap index per output cell
    (first maximum in row-major tap order).
    """
    kh, kw = pair(window)
    sh, sw = pair(stride if stride is not None else window)
    h, wd = x.shape[-2:]
    if kh > h or kw > wd:
        raise DimensionError(f"pool window {kh}x{kw} larger than input {h}x{wd}")
    ho = (h - kh) // sh + 1
    wo = (wd - kw) // sw + 1
    lead = (slice(None),) * (x.ndim - 2)
    best = None
    arg = np.zeros(x.shape[:-2] + (ho, wo), dtype=np.int16)
    for i in range(kh):
        for j in range(kw):
            xs = x[lead + (slice(i, i + sh * (ho - 1) + 1, sh), slice(j, j + sw * (wo - 1) + 1, sw))]
            if best is None:
                best = xs.copy()
                continue
            better = xs > best
            best = np.where(better, xs, best)
            arg[better] = i * kw + j
    return best, arg


def maxpool2d_backward(gy, arg, in_shape, window, stride=None):
    kh, kw = pair(window)
    sh, sw = pair(stride if stride is not None else window)
    ho, wo = gy.shape[-2:]
    gx = np.zeros(in_shape)
    lead = (slice(None),) * (len(in_shape) - 2)
    for i in range(kh):
        for j in range(kw):
            sl = lead + (slice(i, i + sh * (ho - 1) + 1, sh), slice(j, j + sw * (wo - 1) + 1, sw))
            gx[sl] += np.where(arg == i * kw + j, gy, 0.0)
    return gx


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def log_softmax(logits, axis=-1):
    m = logits.max(axis=axis, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
