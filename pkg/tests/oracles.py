"""Naive loop references used as independent oracles by the tests."""

import numpy as np


class Counter:
    def __init__(self):
        self.mults = 0


def naive_conv2d(x, w, b=None, stride=(1, 1), padding=(0, 0), dilation=(1, 1), groups=1, counter=None):
    """Seven nested loops over (batch, out channel, out row, out col, in channel, tap row, tap col)."""
    bsz, cin, h, wd = x.shape
    cout, cg, kh, kw = w.shape
    sh, sw = stride
    ph, pw = padding
    dh, dw = dilation
    ho = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
    wo = (wd + 2 * pw - dw * (kw - 1) - 1) // sw + 1
    og = cout // groups
    y = np.zeros((bsz, cout, ho, wo))
    for n in range(bsz):
        for co in range(cout):
            g = co // og
            for r in range(ho):
                for c in range(wo):
                    acc = 0.0 if b is None else b[co]
                    for ci in range(cg):
                        for i in range(kh):
                            for j in range(kw):
                                rr = r * sh - ph + i * dh
                                cc = c * sw - pw + j * dw
                                v = x[n, g * cg + ci, rr, cc] if 0 <= rr < h and 0 <= cc < wd else 0.0
                                acc += w[co, ci, i, j] * v
                                if counter is not None and n == 0:
                                    counter.mults += 1
                    y[n, co, r, c] = acc
    return y


def naive_maxpool(x, k, s):
    h, w = x.shape[-2:]
    ho, wo = (h - k) // s + 1, (w - k) // s + 1
    y = np.zeros(x.shape[:-2] + (ho, wo))
    for idx in np.ndindex(*x.shape[:-2]):
        for r in range(ho):
            for c in range(wo):
                best = -np.inf
                for i in range(k):
                    for j in range(k):
                        best = max(best, x[idx + (r * s + i, c * s + j)])
                y[idx + (r, c)] = best
    return y


def naive_correlate_valid(x, h):
    """y[t] = sum_n h[n] x[t + n]."""
    out = np.zeros(len(x) - len(h) + 1)
    for t in range(len(out)):
        acc = 0.0
        for n in range(len(h)):
            acc += h[n] * x[t + n]
        out[t] = acc
    return out


def naive_bn_eval(x, gamma, beta, mean, var, eps):
    y = np.empty_like(x)
    for idx in np.ndindex(*x.shape):
        c = idx[1]
        y[idx] = gamma[c] * (x[idx] - mean[c]) / np.sqrt(var[c] + eps) + beta[c]
    return y


def naive_bn_train(x, gamma, beta, eps):
    y = np.empty_like(x)
    for c in range(x.shape[1]):
        vals = x[:, c].ravel()
        m = sum(vals) / len(vals)
        v = sum((vals - m) ** 2) / len(vals)
        y[:, c] = gamma[c] * (x[:, c] - m) / np.sqrt(v + eps) + beta[c]
    return y


# detection metrics by direct counting at every candidate threshold

def brute_force_operating_points(bona, spoof):
    """(FAR, FRR) accepting scores >= t, for t over every distinct score and +inf."""
    bona, spoof = np.asarray(bona, float), np.asarray(spoof, float)
    cands = sorted(set(bona.tolist()) | set(spoof.tolist())) + [np.inf]
    return [(float(np.sum(spoof >= t)) / spoof.size, float(np.sum(bona < t)) / bona.size) for t in cands]


def brute_force_eer(bona, spoof):
    pts = brute_force_operating_points(bona, spoof)
    prev = None
    for far, frr in pts:
        d = far - frr
        if d <= 0:
            if d == 0 or prev is None:
                return far
            pfar, pfrr = prev
            pd = pfar - pfrr
            a = pd / (pd - d)
            return pfar + a * (far - pfar)
        prev = (far, frr)
    raise AssertionError("FAR - FRR never reaches zero")


def brute_force_min_tdcf(bona, spoof, c0, c1, c2):
    return min((c0 + c1 * frr + c2 * far) / (c0 + min(c1, c2))
               for far, frr in brute_force_operating_points(bona, spoof))
