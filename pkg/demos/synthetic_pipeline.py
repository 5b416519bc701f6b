#!/usr/bin/env python3
"""End to end on the bundled synthetic corpus through the command-line entry point.

gen-synthetic -> train -> score -> evaluate -> analyze-durations.

Run: python3 demos/synthetic_pipeline.py [work_dir] [epochs]
Twenty epochs take a few minutes on one CPU core; the default of 3 is a smoke run.
"""
import sys
from pathlib import Path

from rawtfnet.cli import main as cli
from rawtfnet.config import load_run_config


def run(*argv):
    print("$ rawtfnet", " ".join(argv))
    code = cli(list(argv))
    if code != 0:
        sys.exit(code)


def main():
    work = Path(sys.argv[1] if len(sys.argv) > 1 else "synthetic_demo")
    epochs = sys.argv[2] if len(sys.argv) > 2 else "3"
    run("gen-synthetic", str(work), "--seed", "0")
    cfg_path = work / "config.yaml"
    cfg = load_run_config(cfg_path)
    run_dir = work / "run"
    run("train", "--config", str(cfg_path), "--epochs", epochs, "--output-dir", str(run_dir))
    scores = run_dir / "eval_scores.txt"
    run("score", "--model", str(run_dir / "averaged.ckpt"), "--protocol", cfg.eval_protocol,
        "--audio-root", cfg.audio_root, "--out", str(scores))
    run("evaluate", "--scores", str(scores), "--protocol", cfg.eval_protocol, "--tdcf", "1", "1", "10")
    run("analyze-durations", "--scores", str(scores), "--protocol", cfg.eval_protocol,
        "--audio-root", cfg.audio_root)


if __name__ == "__main__":
    main()
