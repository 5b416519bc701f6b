"""Command-line entry point: ``rawtfnet <command> ...``.

Exit codes: 0 success, 1 partial (some utterances skipped), 2 usage or
configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import synthetic
from .audio import load_utterances, parse_protocol, wav_duration
from .complexity import complexity_report
from .config import RunConfig, default_keys, load_run_config, parse_value, write_run_config
from .errors import ConfigError, DataError, NumericError, ParseError, StateError
from .metrics import (DEFAULT_DURATION_EDGES, ScoreRecord, TdcfCosts, compute_eer, compute_min_tdcf,
                      duration_bucketed_eer, read_scores, split_by_label, write_scores)
from .model import ModelConfig, build_rawtfnet
from .training import fit, load_checkpoint, save_checkpoint, score_eval_set

log = logging.getLogger("rawtfnet")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# shortcut flags and the dotted key each one sets
_SHORTCUTS = {
    "epochs": ("train.epochs", int),
    "lr": ("optim.lr", float),
    "output_dir": ("output_dir", str),
}
_ABLATIONS = {
    "no_freq_branch": "model.freq_branch",
    "no_time_branch": "model.time_branch",
    "no_shuffle": "model.shuffle",
}


def _add_config_args(p: argparse.ArgumentParser, shortcuts=True) -> None:
    p.add_argument("--config", type=Path, help="YAML file of dotted keys")
    grp = p.add_argument_group("config overrides (any dotted key)")
    for key in default_keys():
        grp.add_argument(f"--{key}", dest=f"cfg:{key}", metavar="VALUE", type=parse_value, default=None)
    if shortcuts:
        for name, (key, typ) in _SHORTCUTS.items():
            p.add_argument(f"--{name.replace('_', '-')}", dest=f"short:{name}", type=typ, default=None,
                           help=f"same as --{key}")
    for name, key in _ABLATIONS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=f"abl:{name}", action="store_true",
                       help=f"sets {key} to false")


def _run_config(args) -> RunConfig:
    overrides = {}
    for dest, value in vars(args).items():
        if value is None:
            continue
        if dest.startswith("cfg:"):
            overrides[dest[4:]] = value
        elif dest.startswith("short:"):
            overrides[_SHORTCUTS[dest[6:]][0]] = value
        elif dest.startswith("abl:") and value:
            overrides[_ABLATIONS[dest[4:]]] = False
    return load_run_config(args.config, overrides)


# commands

def cmd_train(args) -> int:
    cfg = _run_config(args)
    cfg.validate(require_paths=("audio_root", "train_protocol", "dev_protocol"))
    out = Path(cfg.output_dir)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    write_run_config(out / "config.yaml", cfg)

    def load(protocol):
        utts, skipped = load_utterances(parse_protocol(protocol, cfg.audio_root, cfg.path_template))
        if skipped:
            raise DataError(f"{protocol}: {len(skipped)} unreadable utterances (first: {skipped[0]})")
        return utts

    train_utts, dev_utts = load(cfg.train_protocol), load(cfg.dev_protocol)
    model = build_rawtfnet(cfg.model, cfg.seed)
    log_path = out / "train.log"
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch\ttrain_loss\ttrain_acc\tmetric\tvalue\n")

        def on_epoch(row, ckpt):
            name = "val_eer" if "val_eer" in row else "val_loss"
            fh.write(f"{row['epoch']}\t{row['train_loss']:.9e}\t{row['train_acc']:.6f}\t{name}\t{row[name]:.9e}\n")
            fh.flush()
            save_checkpoint(out / "checkpoints" / f"epoch_{row['epoch']:03d}.ckpt", ckpt)
            print(f"epoch {row['epoch']}: loss {row['train_loss']:.4f} {name} {row[name]:.4f}")

        result = fit(model, train_utts, dev_utts, cfg.train_config(), on_epoch=on_epoch)
    save_checkpoint(out / "averaged.ckpt", result.averaged)
    print(f"averaged top-{min(cfg.top_k, len(result.checkpoints))} checkpoints -> {out / 'averaged.ckpt'}")
    return EXIT_OK


def cmd_score(args) -> int:
    expect = _run_config(args).model if args.config else None
    ckpt = load_checkpoint(args.model, expect)
    if ckpt.config is None:
        raise StateError(f"{args.model}: checkpoint carries no model config")
    model = build_rawtfnet(ModelConfig.from_dict(ckpt.config), 0)
    model.load_state_dict(ckpt.state)
    template = args.path_template
    entries = parse_protocol(args.protocol, args.audio_root, template)
    records, skipped = score_eval_set(model, entries, args.batch_size, args.threads)
    write_scores(args.out, records)
    print(f"scored {len(records)}, skipped {len(skipped)}")
    return EXIT_PARTIAL if skipped else EXIT_OK


def _labels_for(score_records, protocol) -> dict:
    labels = {e.utt_id: e.label for e in parse_protocol(protocol)}
    unknown = [r.utt_id for r in score_records if r.utt_id not in labels]
    if unknown:
        shown = ", ".join(unknown[:10]) + (" ..." if len(unknown) > 10 else "")
        raise ConfigError(f"{len(unknown)} scored utterances missing from the protocol: {shown}")
    return labels


def _tdcf_costs(args) -> TdcfCosts | None:
    if args.tdcf is not None:
        return TdcfCosts(*args.tdcf)
    if args.config is not None:
        return load_run_config(args.config).tdcf
    return None


def cmd_evaluate(args) -> int:
    records = read_scores(args.scores)
    labels = _labels_for(records, args.protocol)
    scores = split_by_label(records, labels)
    eer, thr = compute_eer(scores)
    lines = [("n_bonafide", str(len(scores.bonafide_scores))), ("n_spoof", str(len(scores.spoof_scores))),
             ("eer", f"{eer:.9e}"), ("eer_threshold", f"{thr:.9e}")]
    print(f"EER: {100 * eer:.3f}% (threshold {thr:.6g}; {len(scores.bonafide_scores)} bonafide, "
          f"{len(scores.spoof_scores)} spoof)")
    costs = _tdcf_costs(args)
    if costs is not None:
        tdcf, tdcf_thr = compute_min_tdcf(scores, costs)
        print(f"min t-DCF: {tdcf:.6f}")
        lines += [("min_tdcf", f"{tdcf:.9e}"), ("min_tdcf_threshold", f"{tdcf_thr:.9e}")]
    if args.report:
        Path(args.report).write_text("".join(f"{k}\t{v}\n" for k, v in lines), encoding="utf-8")
    return EXIT_OK


def _read_durations(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'utt_id duration_s'")
        out[parts[0]] = float(parts[1])
    return out


def cmd_analyze_durations(args) -> int:
    records = read_scores(args.scores)
    labels = _labels_for(records, args.protocol)
    if args.durations is not None:
        durations = _read_durations(args.durations)
    else:
        if args.audio_root is None:
            raise ConfigError("analyze-durations needs --audio-root or --durations")
        paths = {e.utt_id: e.path for e in parse_protocol(args.protocol, args.audio_root, args.path_template)}
        durations, skipped = {}, []
        for r in records:
            try:
                durations[r.utt_id] = wav_duration(paths[r.utt_id])
            except (OSError, ParseError) as exc:
                log.warning("skipping %s: %s", r.utt_id, exc)
                skipped.append(r.utt_id)
    missing = [r.utt_id for r in records if r.utt_id not in durations]
    timed = [ScoreRecord(r.utt_id, r.score, durations[r.utt_id]) for r in records if r.utt_id in durations]
    buckets = duration_bucketed_eer(timed, labels, args.edges)
    print(f"{'bucket':<10} {'n':>6} {'bonafide':>9} {'spoof':>7} {'EER':>9}")
    for b in buckets:
        eer = "-" if b.eer is None else f"{100 * b.eer:.3f}%"
        print(f"{b.label:<10} {b.n:>6} {b.n_bonafide:>9} {b.n_spoof:>7} {eer:>9}")
    if args.report:
        text = "".join(f"{b.label}\t{b.n}\t{'nan' if b.eer is None else format(b.eer, '.9e')}\n"
                       for b in buckets)
        Path(args.report).write_text(text, encoding="utf-8")
    if missing:
        print(f"{len(missing)} utterances without a duration were left out")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_complexity(args) -> int:
    cfg = _run_config(args).model
    cfg.validate()
    model = build_rawtfnet(cfg, 0)
    report = complexity_report(model, args.input_len)
    print(report.to_text())
    if args.tsv:
        Path(args.tsv).write_text(report.to_tsv(), encoding="utf-8")
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    splits = (
        synthetic.SplitSpec("train", "SYN_T", args.n_train, (1.0, 4.0)),
        synthetic.SplitSpec("dev", "SYN_D", args.n_dev, (1.0, 4.0)),
        synthetic.SplitSpec("eval", "SYN_E", args.n_eval, (0.5, 10.0)),
    )
    out = Path(args.out_dir)
    protocols = synthetic.generate(out, args.seed, splits)
    cfg = synthetic.synthetic_run_config(out, protocols, args.seed)
    write_run_config(out / "config.yaml", cfg)
    print(f"wrote {sum(s.n for s in splits)} utterances and {out / 'config.yaml'}")
    return EXIT_OK


# parser

def _edges(text: str) -> tuple[float, ...]:
    try:
        edges = tuple(math.inf if v.strip() in ("inf", "+inf") else float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bucket edges {text!r}") from None
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise argparse.ArgumentTypeError("bucket edges must be increasing and at least two")
    return edges


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rawtfnet", description="Raw-waveform spoofing countermeasure toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train, checkpoint every epoch, average the top-k")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a protocol's utterances with a checkpoint")
    p.add_argument("--model", required=True, type=Path, help="checkpoint file")
    p.add_argument("--protocol", required=True, type=Path)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--out", required=True, type=Path, help="score file to write")
    p.add_argument("--path-template", default="{root}/{utt_id}.wav")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--threads", type=int, default=1, help="scoring worker threads")
    _add_config_args(p, shortcuts=False)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="EER and optional min t-DCF of a score file")
    p.add_argument("--scores", required=True, type=Path)
    p.add_argument("--protocol", required=True, type=Path)
    p.add_argument("--tdcf", nargs=3, type=float, metavar=("C0", "C1", "C2"))
    p.add_argument("--config", type=Path, help="take t-DCF costs from this run config")
    p.add_argument("--report", type=Path, help="write key<TAB>value lines here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze-durations", help="EER per source-duration bucket")
    p.add_argument("--scores", required=True, type=Path)
    p.add_argument("--protocol", required=True, type=Path)
    p.add_argument("--audio-root")
    p.add_argument("--path-template", default="{root}/{utt_id}.wav")
    p.add_argument("--durations", type=Path, help="sidecar of 'utt_id duration_s' lines")
    p.add_argument("--edges", type=_edges, default=DEFAULT_DURATION_EDGES, help="e.g. 0,2,4,6,8,inf")
    p.add_argument("--report", type=Path, help="write bucket<TAB>n<TAB>eer lines here")
    p.set_defaults(func=cmd_analyze_durations)

    p = sub.add_parser("complexity", help="per-layer parameter and MAC counts")
    _add_config_args(p, shortcuts=False)
    p.add_argument("--input-len", type=int, default=None, help="input samples (default: model.segment_len)")
    p.add_argument("--tsv", type=Path, help="write layer<TAB>params<TAB>macs lines here")
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("gen-synthetic", help="write the synthetic two-class corpus and a run config")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-dev", type=int, default=60)
    p.add_argument("--n-eval", type=int, default=100)
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ParseError, DataError, StateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
