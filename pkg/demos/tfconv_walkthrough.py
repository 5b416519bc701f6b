#!/usr/bin/env python3
"""Follow one tensor through a TF-Conv block: shuffle, split, the two axis summaries, broadcast add.

Run: python3 demos/tfconv_walkthrough.py
"""
import numpy as np

from rawtfnet.tensor import Rng
from rawtfnet.tfconv import (TfConvBlock, TfConvConfig, broadcast_add_freq, broadcast_add_time, channel_shuffle,
                             freq_branch, shuffle_permutation, split_channels, time_branch)


def main():
    x = np.random.default_rng(0).standard_normal((1, 4, 6, 10))  # (B, C, F, T)
    block = TfConvBlock(TfConvConfig(in_channels=4, out_channels=8), Rng(0))

    h = block.transition.forward(x)
    print("after transition     ", h.shape)
    print("shuffle permutation  ", shuffle_permutation(8, 2).tolist())
    h = channel_shuffle(h, 2)
    x_f, x_t = split_channels(h)
    print("frequency half       ", x_f.shape, " time half", x_t.shape)

    v_f = freq_branch(x_f, block.freq)  # pooled over frequency -> (B, C/2, 1, T)
    v_t = time_branch(x_t, block.time)  # pooled over time      -> (B, C/2, F, 1)
    print("frequency summary    ", v_f.shape, " time summary", v_t.shape)

    out = np.concatenate([broadcast_add_freq(x_f, v_f), broadcast_add_time(x_t, v_t)], axis=1)
    print("block output         ", out.shape)
    print("matches block.forward", np.allclose(out, block.forward(x)))


if __name__ == "__main__":
    main()
