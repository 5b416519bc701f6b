#!/usr/bin/env python3
"""Parameter and MAC totals for both widths and every ablation variant.

Run: python3 demos/complexity_table.py
"""
from rawtfnet import ModelConfig, build_rawtfnet, complexity_report

VARIANTS = {
    "full": {},
    "w/o freq branch": {"freq_branch": False},
    "w/o time branch": {"time_branch": False},
    "w/o shuffle": {"shuffle": False},
}


def main():
    print(f"{'model':<28} {'params':>10} {'MACs @ 64000':>14}")
    for tau in (16, 32):
        for name, flags in VARIANTS.items():
            rep = complexity_report(build_rawtfnet(ModelConfig(tau=tau, **flags), 0), 64000)
            print(f"{f'tau={tau} {name}':<28} {rep.total_params:>10,d} {rep.total_macs / 1e9:>13.3f}G")


if __name__ == "__main__":
    main()
