"""Command-line front end.

Exit codes: 0 success, 1 I/O failure, 2 domain or validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from qlm import circuit, corpus, ensemble, evaluate, model
from qlm.errors import DensityError, EmptyPeriodError, ModelFormatError, NumericalError, OOVError
from qlm.linalg import hs_similarity, partial_trace
from qlm.trainer import TrainConfig, train

log = logging.getLogger("qlm")

EXIT_OK, EXIT_IO, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3


class DomainError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 42)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="default worker count for parallel stages (default 1)")
    p.add_argument("--log-level", default=argparse.SUPPRESS,
                   help="logging level (default: $QLM_LOG or WARNING)")
    return p


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--subsample", type=float, default=1e-4)
    p.add_argument("--workers", type=int, default=None)


def _mode_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[corpus.WHITESPACE, corpus.CHAR], default=corpus.WHITESPACE,
                   help="tokenizer")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="qlm", parents=[common],
                                     description="Density-matrix word embeddings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", parents=[common], help="count tokens and write a vocabulary file")
    p.add_argument("--corpus", nargs="+", required=True)
    p.add_argument("--min-count", type=int, default=5)
    _mode_flag(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--corpus", nargs="+", required=True)
    _train_flags(p)
    _mode_flag(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", parents=[common], help="word-similarity evaluation")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sim", choices=[evaluate.HS, evaluate.UHLMANN], default=evaluate.HS)
    _mode_flag(p)

    p = sub.add_parser("neighbors", parents=[common], help="nearest neighbours of a word")
    p.add_argument("--model", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--sim", choices=[evaluate.HS, evaluate.UHLMANN], default=evaluate.HS)

    p = sub.add_parser("entropy", parents=[common], help="ensemble entropy per period")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--train-per-period", action="store_true")
    p.add_argument("--manifest", required=True)
    p.add_argument("--base", choices=["e", "2"], default="e")
    p.add_argument("--out", required=True)
    _train_flags(p)
    _mode_flag(p)

    p = sub.add_parser("swap-test", parents=[common], help="simulate a swap test between two words")
    p.add_argument("--model", required=True)
    p.add_argument("--w1", required=True)
    p.add_argument("--w2", required=True)
    p.add_argument("--shots", type=int, default=10000)

    p = sub.add_parser("purify-check", parents=[common], help="verify purification of a word's density")
    p.add_argument("--model", required=True)
    p.add_argument("--word", required=True)
    return parser


def _opt(args, name, default):
    return getattr(args, name, default)


def _config(args) -> TrainConfig:
    workers = args.workers if args.workers is not None else _opt(args, "threads", 1)
    try:
        return TrainConfig(
            dim=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs,
            lr=args.lr, subsample_t=args.subsample, seed=_opt(args, "seed", 42),
            min_count=args.min_count, workers=workers,
        )
    except ValueError as exc:
        raise DomainError(str(exc)) from None


def _out(line: str) -> None:
    sys.stdout.write(line + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_vocab(args) -> int:
    if args.min_count < 1:
        raise DomainError("--min-count must be >= 1")
    tokens = corpus.read_tokens(args.corpus, args.mode)
    try:
        vocab = model.build_vocab(tokens, args.min_count)
    except ValueError as exc:
        raise DomainError(f"empty vocabulary: {exc}") from None
    model.save_vocab(vocab, args.out)
    _out(f"words\t{len(vocab)}")
    _out(f"tokens\t{len(tokens)}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config(args)
    tokens = corpus.read_tokens(args.corpus, args.mode)
    store, stats = train(tokens, config)
    for i, loss in enumerate(stats.epoch_losses, 1):
        _out(f"{i}\t{loss:.6f}")
    model.save_model(store, args.out)
    log.info("wrote %d words x %d params to %s in %.1fs", len(store.vocab), store.n_params,
             args.out, stats.wall_time)
    return EXIT_OK


def cmd_eval(args) -> int:
    store = model.load_model(args.model)
    dataset = evaluate.load_similarity_dataset(args.dataset, lowercase=args.mode == corpus.WHITESPACE)
    report = evaluate.evaluate(store, dataset, args.sim)
    _out(report.tsv())
    _out(str(report))
    return EXIT_OK


def cmd_neighbors(args) -> int:
    store = model.load_model(args.model)
    for word, score in evaluate.nearest_neighbors(store, args.word, args.k, args.sim):
        _out(f"{word}\t{score:.6f}")
    return EXIT_OK


def cmd_entropy(args) -> int:
    manifest = corpus.load_manifest(args.manifest)
    base = "natural" if args.base == "e" else "two"
    if args.train_per_period:
        series = ensemble.period_entropy_series(
            manifest, mode=ensemble.PER_PERIOD_MODEL, train_config=_config(args),
            tokenizer=args.mode, log_base=base,
        )
    else:
        store = model.load_model(args.model)
        series = ensemble.period_entropy_series(manifest, store, tokenizer=args.mode, log_base=base)
    series.write_csv(args.out)
    log.info("wrote %d periods (%s, log base %s) to %s", len(series), series.mode, args.base, args.out)
    return EXIT_OK


def _power_of_two_dim(store) -> int:
    try:
        return circuit.qubits_for(store.dim)
    except DensityError:
        raise DomainError(
            f"model dimension {store.dim} is not a power of two; retrain with --dim 2, 4 or 8"
        ) from None


def cmd_swap_test(args) -> int:
    if args.shots < 1:
        raise DomainError("--shots must be >= 1")
    store = model.load_model(args.model)
    m = _power_of_two_dim(store)
    rho, sigma = model.get_density(store, args.w1), model.get_density(store, args.w2)
    exact = circuit.swap_test_exact(rho, sigma)
    shots = circuit.swap_test_sample(rho, sigma, args.shots, _opt(args, "seed", 42))
    sigma_p = np.sqrt(exact * (1 - exact) / args.shots)
    _out(f"qubits_per_state\t{2 * m}")
    _out(f"control_qubits\t1")
    _out(f"total_qubits\t{4 * m + 1}")
    _out(f"trace_overlap\t{hs_similarity(rho, sigma):.12f}")
    _out(f"exact_p0\t{exact:.12f}")
    _out(f"sampled_p0\t{shots.estimate:.6f}")
    _out(f"zeros\t{shots.zeros}/{shots.shots}")
    _out(f"z_score\t{(shots.estimate - exact) / sigma_p if sigma_p > 0 else 0.0:.3f}")
    return EXIT_OK


def cmd_purify_check(args) -> int:
    store = model.load_model(args.model)
    m = _power_of_two_dim(store)
    rho = model.get_density(store, args.word)
    state = circuit.purify(rho)
    d = store.dim
    joint = np.outer(state.amplitudes, state.amplitudes)
    recovered = partial_trace(joint, (d, d), keep="first")
    _out(f"principal_qubits\t{m}")
    _out(f"ancilla_qubits\t{m}")
    _out(f"total_qubits\t{state.num_qubits}")
    _out(f"norm\t{state.norm():.15f}")
    _out(f"max_abs_error\t{float(np.max(np.abs(recovered - rho))):.3e}")
    _out(f"exact_self_p0\t{circuit.swap_test_exact(rho, rho):.12f}")
    return EXIT_OK


COMMANDS = {
    "build-vocab": cmd_build_vocab,
    "train": cmd_train,
    "eval": cmd_eval,
    "neighbors": cmd_neighbors,
    "entropy": cmd_entropy,
    "swap-test": cmd_swap_test,
    "purify-check": cmd_purify_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = _opt(args, "log_level", None) or os.environ.get("QLM_LOG", "WARNING")
    logging.basicConfig(level=str(level).upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = _opt(args, "threads", 1)
    if threads < 1:
        print("qlm: --threads must be >= 1", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"qlm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EmptyPeriodError as exc:
        print(f"qlm: empty period {exc.period!r}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ModelFormatError, UnicodeDecodeError) as exc:
        print(f"qlm: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, DensityError, OOVError, ValueError) as exc:
        print(f"qlm: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
