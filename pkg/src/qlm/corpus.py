"""Tokenization, context windows, frequency subsampling and period manifests."""

from __future__ import annotations

import math
import os
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from qlm.errors import EmptyPeriodError
from qlm.model import Vocabulary

WHITESPACE = "whitespace"
CHAR = "char"
DEFAULT_WINDOW = 5
DEFAULT_SUBSAMPLE = 1e-4

_ASCII_LOWER = str.maketrans("ABCDEFGHIJKLMNOPQRSTUVWXYZ", "abcdefghijklmnopqrstuvwxyz")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text, mode: str = WHITESPACE, punctuation=None) -> list[str]:
    """Split text into tokens.

    ``whitespace`` splits on Unicode whitespace and lowercases ASCII letters
    only. ``char`` emits one token per code point, skipping whitespace and
    punctuation; ``punctuation`` is a string of characters to skip, defaulting
    to every Unicode ``P*`` category character.

    ``bytes`` input is decoded as strict UTF-8 (``UnicodeDecodeError`` on
    invalid input).
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    if mode == WHITESPACE:
        return text.translate(_ASCII_LOWER).split()
    if mode == CHAR:
        skip = _is_punct if punctuation is None else set(punctuation).__contains__
        return [ch for ch in text if not ch.isspace() and not skip(ch)]
    raise ValueError(f"unknown tokenizer mode {mode!r}")


def read_tokens(paths: str | os.PathLike | Sequence, mode: str = WHITESPACE) -> list[str]:
    """Tokenize one or more UTF-8 files, concatenated in the given order."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    tokens: list[str] = []
    for p in paths:
        with open(p, "rb") as fh:
            tokens.extend(tokenize(fh.read(), mode))
    return tokens


# ---------------------------------------------------------------------------
# windows


class ContextPair(NamedTuple):
    center: int
    context: tuple[int, ...]


def keep_probabilities(vocab: Vocabulary, subsample_t: float) -> np.ndarray:
    """Per-id retention probability ``min(1, sqrt(t / f))``.

    ``t <= 0`` or ``t = inf`` disables subsampling.
    """
    counts = np.asarray(vocab.counts, dtype=np.float64)
    if not subsample_t > 0 or math.isinf(subsample_t):
        return np.ones_like(counts)
    freq = counts / counts.sum()
    return np.minimum(1.0, np.sqrt(subsample_t / freq))


def subsample(ids: np.ndarray, keep_prob: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Drop each position independently with probability ``1 - keep_prob[id]``."""
    if ids.size == 0 or np.all(keep_prob >= 1.0):
        return ids
    return ids[rng.random(ids.size) < keep_prob[ids]]


def windows(tokens: Iterable[str], vocab: Vocabulary, window: int = DEFAULT_WINDOW,
            subsample_t: float = DEFAULT_SUBSAMPLE, seed: int = 0) -> Iterator[ContextPair]:
    """Yield CBOW ``(center, context)`` pairs over the in-vocabulary tokens.

    OOV tokens are removed first, then frequent words are subsampled; only
    the surviving positions take part in windowing.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    ids = vocab.encode(tokens)
    ids = subsample(ids, keep_probabilities(vocab, subsample_t), np.random.default_rng(seed))
    n = ids.size
    seq = ids.tolist()
    for i in range(n):
        ctx = seq[max(0, i - window):i] + seq[i + 1:i + 1 + window]
        if ctx:
            yield ContextPair(seq[i], tuple(ctx))


# ---------------------------------------------------------------------------
# periods


@dataclass
class PeriodManifest:
    """Ordered ``period -> files`` mapping."""

    periods: list[tuple[str, list[str]]] = field(default_factory=list)

    def add(self, name: str, path: str) -> None:
        for existing, paths in self.periods:
            if existing == name:
                paths.append(path)
                return
        self.periods.append((name, [path]))

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.periods]

    def check(self) -> None:
        for name, paths in self.periods:
            if not paths:
                raise EmptyPeriodError(name)
            for p in paths:
                if not os.path.isfile(p):
                    raise FileNotFoundError(f"period {name!r}: missing file {p}")


def load_manifest(path) -> PeriodManifest:
    """Parse a ``period<TAB>path`` manifest.

    Blank lines and ``#`` comments are skipped, a repeated period name appends
    another file, and relative paths resolve against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    manifest = PeriodManifest()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ValueError(f"{path}:{lineno}: expected 'period<TAB>path'")
            name, file = parts[0].strip(), parts[1].strip()
            manifest.add(name, file if os.path.isabs(file) else os.path.join(base, file))
    manifest.check()
    return manifest


def partition_by_period(manifest: PeriodManifest, mode: str = WHITESPACE) -> list[tuple[str, list[str]]]:
    """One token stream per period, in manifest order."""
    manifest.check()
    out = []
    for name, paths in manifest.periods:
        tokens = read_tokens(paths, mode)
        if not tokens:
            raise EmptyPeriodError(name)
        out.append((name, tokens))
    return out
