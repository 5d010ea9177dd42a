"""Vocabulary, per-word Cholesky factors, and the QLM1 binary model format.

File layout (little-endian, no padding)::

    b"QLM1"            magic
    u32 version        = 1
    u32 V              vocabulary size
    u32 d              matrix dimension (0 for a vocabulary-only file)
    u8  flags          bit 0 complex (must be 0), bit 1 vocabulary-only
    V x (u32 nbytes, UTF-8 word bytes, u64 count)
    V x d(d+1)/2 float64, row-major lower triangle of each factor
"""

from __future__ import annotations

import os
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from qlm.errors import (
    BadMagicError,
    DensityError,
    InvalidWordEncodingError,
    ModelFormatError,
    OOVError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from qlm.linalg import cholesky_to_density, n_lower, unpack_lower

MAGIC = b"QLM1"
VERSION = 1
FLAG_COMPLEX = 0x01
FLAG_VOCAB_ONLY = 0x02
DEFAULT_DIM = 8

_HEADER = struct.Struct("<4sIIIB")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


@dataclass
class Vocabulary:
    """Ordered word list with exact token counts; ids are dense and stable."""

    words: list[str]
    counts: list[int]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.words) != len(self.counts):
            raise ValueError("words and counts differ in length")
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __getitem__(self, word) -> int:
        try:
            return self.index[word]
        except KeyError:
            raise OOVError(word) from None

    def get(self, word, default=None):
        return self.index.get(word, default)

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        """Map tokens to ids, silently dropping out-of-vocabulary tokens."""
        index = self.index
        return np.fromiter((index[t] for t in tokens if t in index), dtype=np.int64)

    def __eq__(self, other):
        return (
            isinstance(other, Vocabulary)
            and self.words == other.words
            and list(self.counts) == list(other.counts)
        )


def build_vocab(tokens: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times, in first-occurrence order."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    # Counter preserves insertion order, i.e. first occurrence
    tally = Counter(tokens)
    kept = [(w, c) for w, c in tally.items() if c >= min_count]
    if not kept:
        raise ValueError(f"no token occurs at least {min_count} times")
    return Vocabulary([w for w, _ in kept], [c for _, c in kept])


@dataclass(eq=False)
class EmbeddingStore:
    """One packed Cholesky factor per vocabulary word.

    ``factors`` has shape ``(V, dim*(dim+1)//2)``.
    """

    vocab: Vocabulary
    dim: int
    factors: np.ndarray
    complex: bool = False

    def __post_init__(self):
        self.factors = np.ascontiguousarray(self.factors, dtype=np.float64)
        expected = (len(self.vocab), n_lower(self.dim))
        if self.factors.shape != expected:
            raise ValueError(f"factors shape {self.factors.shape}, expected {expected}")
        if self.complex:
            raise NotImplementedError("complex-valued stores are not supported")

    @property
    def n_params(self) -> int:
        return n_lower(self.dim)

    def lower(self, ids=None) -> np.ndarray:
        """Unpacked lower-triangular factors, shape ``(n, d, d)``."""
        packed = self.factors if ids is None else self.factors[ids]
        return unpack_lower(packed, self.dim)

    def density(self, word_id: int) -> np.ndarray:
        return cholesky_to_density(unpack_lower(self.factors[word_id], self.dim))

    def densities(self, ids=None) -> np.ndarray:
        """All (or selected) word densities at once, shape ``(n, d, d)``."""
        L = self.lower(ids)
        A = L @ np.swapaxes(L, -1, -2)
        A = 0.5 * (A + np.swapaxes(A, -1, -2))
        tr = np.trace(A, axis1=-2, axis2=-1)
        if np.any(tr <= 0):
            raise DensityError("all-zero Cholesky factor in store")
        return A / tr[:, None, None]

    def __eq__(self, other):
        return (
            isinstance(other, EmbeddingStore)
            and self.vocab == other.vocab
            and self.dim == other.dim
            and self.factors.tobytes() == other.factors.tobytes()
        )


def init_embeddings(vocab: Vocabulary, dim: int = DEFAULT_DIM, seed: int = 0,
                    noise: float = 0.1) -> EmbeddingStore:
    """Factors near ``I/sqrt(dim)``, so every word starts near the maximally mixed state.

    Every entry gets uniform noise in ``[-noise/dim, noise/dim]``; the diagonal
    is then clamped at zero.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    rng = np.random.default_rng(seed)
    amp = noise / dim
    L = rng.uniform(-amp, amp, size=(len(vocab), dim, dim))
    diag = np.arange(dim)
    L[:, diag, diag] = np.maximum(L[:, diag, diag] + 1.0 / np.sqrt(dim), 0.0)
    rows, cols = np.tril_indices(dim)
    return EmbeddingStore(vocab, dim, L[:, rows, cols])


def get_density(store: EmbeddingStore, word: str) -> np.ndarray:
    return store.density(store.vocab[word])


# ---------------------------------------------------------------------------
# persistence


def _encode_vocab(vocab: Vocabulary) -> bytes:
    parts = []
    for w, c in zip(vocab.words, vocab.counts):
        raw = w.encode("utf-8")
        parts.append(_U32.pack(len(raw)))
        parts.append(raw)
        parts.append(_U64.pack(int(c)))
    return b"".join(parts)


def _write(path, vocab: Vocabulary, dim: int, flags: int, payload: bytes) -> None:
    if len(vocab) == 0:
        raise ValueError("refusing to save an empty vocabulary")
    header = _HEADER.pack(MAGIC, VERSION, len(vocab), dim, flags)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(_encode_vocab(vocab))
        fh.write(payload)
    os.replace(tmp, path)


def save_model(store: EmbeddingStore, path) -> None:
    factors = np.ascontiguousarray(store.factors, dtype="<f8")
    _write(path, store.vocab, store.dim, 0, factors.tobytes())


def save_vocab(vocab: Vocabulary, path) -> None:
    """Write a vocabulary-only container (``d = 0``, no payload)."""
    _write(path, vocab, 0, FLAG_VOCAB_ONLY, b"")


def _read(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a QLM1 file (magic {buf[:4]!r})")
    if len(buf) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: header truncated")
    _, version, V, d, flags = _HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {VERSION}")
    if flags & FLAG_COMPLEX:
        raise ModelFormatError(f"{path}: complex-valued models are not supported")
    if flags & ~(FLAG_COMPLEX | FLAG_VOCAB_ONLY):
        raise ModelFormatError(f"{path}: unknown flag bits {flags:#04x}")
    pos = _HEADER.size
    words, counts = [], []
    for i in range(V):
        if pos + _U32.size > len(buf):
            raise TruncatedPayloadError(f"{path}: vocabulary truncated at record {i}")
        (n,) = _U32.unpack_from(buf, pos)
        pos += _U32.size
        if pos + n + _U64.size > len(buf):
            raise TruncatedPayloadError(f"{path}: vocabulary truncated at record {i}")
        try:
            words.append(buf[pos:pos + n].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise InvalidWordEncodingError(f"{path}: word {i} is not valid UTF-8") from exc
        pos += n
        (c,) = _U64.unpack_from(buf, pos)
        counts.append(c)
        pos += _U64.size
    try:
        vocab = Vocabulary(words, counts)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
    expected = V * n_lower(d) * 8
    remaining = len(buf) - pos
    if remaining < expected:
        raise TruncatedPayloadError(f"{path}: payload has {remaining} bytes, expected {expected}")
    if remaining > expected:
        raise ModelFormatError(f"{path}: {remaining - expected} trailing bytes")
    payload = np.frombuffer(buf, dtype="<f8", count=V * n_lower(d), offset=pos)
    return vocab, d, flags, payload.astype(np.float64).reshape(V, n_lower(d))


def load_model(path) -> EmbeddingStore:
    vocab, d, flags, factors = _read(path)
    if flags & FLAG_VOCAB_ONLY:
        raise ModelFormatError(f"{path}: vocabulary-only file has no factors")
    if d < 1:
        raise ModelFormatError(f"{path}: dimension {d}")
    return EmbeddingStore(vocab, d, factors)


def load_vocab(path) -> Vocabulary:
    """Read the vocabulary from either a full model or a vocabulary-only file."""
    return _read(path)[0]
