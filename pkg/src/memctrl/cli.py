"""Command-line entry points: gen, train, eval, gradcheck.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import gradcheck as gradcheck_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .config import Config, load_config
from .episodes import load_corpus, save_corpus, synthetic_corpus
from .trainer import evaluate, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memctrl",
        description="Sparse key-value memory with a learned write controller.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic labeled corpus")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, default=Path("."), help="output directory")
    gen.add_argument("--classes", type=int, default=8)
    gen.add_argument("--sequences", type=int, default=2000)
    gen.add_argument("--vocab", type=int, default=200)
    gen.add_argument("--min-len", type=int, default=6)
    gen.add_argument("--max-len", type=int, default=12)
    gen.add_argument("--markers", type=int, default=2,
                     help="entity marker tokens per sequence")

    tr = sub.add_parser("train", help="train on a corpus, write checkpoint + metrics")
    tr.add_argument("--config", type=Path, default=None)
    tr.add_argument("--corpus", type=Path, required=True)
    tr.add_argument("--out", type=Path, default=Path("."), help="output directory")
    tr.add_argument("--seed", type=int, default=None, help="override config seed")
    tr.add_argument("--policy", choices=("ltc", "oldest", "random"), default=None,
                    help="override config policy")
    tr.add_argument("--batches", type=int, default=None,
                    help="override config max_training_batches")

    ev = sub.add_parser("eval", help="per-shot accuracy of a checkpoint")
    ev.add_argument("--config", type=Path, required=True)
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--corpus", type=Path, required=True)
    ev.add_argument("--episodes", type=int, default=500)
    ev.add_argument("--seed", type=int, default=None,
                    help="episode sampling seed (default: config seed + 1)")
    ev.add_argument("--n-way", type=int, default=None)
    ev.add_argument("--k-shot", type=int, default=None)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    return parser


def _cmd_gen(args) -> int:
    corpus = synthetic_corpus(
        seed=args.seed, n_classes=args.classes, n_sequences=args.sequences,
        seq_len_range=(args.min_len, args.max_len), vocab_size=args.vocab,
        markers_per_sequence=args.markers)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "corpus.tsv"
    save_corpus(corpus, path)
    print(f"wrote {len(corpus.sequences)} sequences, "
          f"{corpus.n_labels} labels to {path}")
    return 0


def _cmd_train(args) -> int:
    config = load_config(args.config) if args.config else Config()
    if args.seed is not None:
        config.seed = args.seed
    if args.policy is not None:
        config.policy = args.policy
    if args.batches is not None:
        config.max_training_batches = args.batches
    config.validate()
    corpus = load_corpus(args.corpus)
    args.out.mkdir(parents=True, exist_ok=True)
    metrics_path = args.out / "metrics.jsonl"
    metrics_path.unlink(missing_ok=True)
    ckpt, records = train(config, corpus, metrics_path=metrics_path)
    ckpt_path = args.out / "checkpoint.bin"
    save_checkpoint(ckpt, ckpt_path)
    last = records[-1] if records else None
    print(f"trained {config.max_training_batches} batches "
          f"(policy={config.policy}); checkpoint: {ckpt_path}")
    if last is not None:
        print(f"final batch: J={last.mean_return:.4f} shots={last.shot_accuracy}")
    return 0


def _cmd_eval(args) -> int:
    config = load_config(args.config)
    ckpt = load_checkpoint(args.checkpoint, config)
    corpus = load_corpus(args.corpus)
    seed = args.seed if args.seed is not None else config.seed + 1
    rng = np.random.default_rng(seed)
    table = evaluate(ckpt, corpus, args.episodes, rng,
                     n_way=args.n_way, k_shot=args.k_shot)
    print(table.format())
    return 0


def _cmd_gradcheck(args) -> int:
    return 0 if gradcheck_mod.run_all() else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen": _cmd_gen,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "gradcheck": _cmd_gradcheck,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:  # runtime failures map to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
