"""CBOW training of density-matrix embeddings with negative sampling.

For a center word ``w`` with context words ``c_1..c_n`` the context state is
the uniform mixture ``rho_c = mean_j rho(c_j)``. Scores are trace inner
products ``s = Tr(rho_c rho_w)`` and the per-pair loss is::

    -ln(s_pos + eps) - sum_neg ln(1 - s_neg + eps)

Each word is parametrized as ``rho = L L^T / Tr(L L^T)``. For a loss with
``G = dloss/drho`` the factor gradient is ``tril((2/t) (G L - Tr(G rho) L))``
with ``t = Tr(L L^T)``. After every update the factor diagonal is clamped at
zero.

The functions here are the readable reference; the training loop itself runs
in :mod:`qlm._kernel`.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qlm import _kernel
from qlm.corpus import DEFAULT_SUBSAMPLE, DEFAULT_WINDOW, keep_probabilities
from qlm.errors import NumericalError
from qlm.linalg import mixture_average, pack_lower, unpack_lower
from qlm.model import DEFAULT_DIM, EmbeddingStore, Vocabulary, build_vocab, init_embeddings

log = logging.getLogger(__name__)

EPS = 1e-8
UNIGRAM_POWER = 0.75
MIN_LR_FRACTION = 0.01


@dataclass
class TrainConfig:
    dim: int = DEFAULT_DIM
    window: int = DEFAULT_WINDOW
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.05
    subsample_t: float = DEFAULT_SUBSAMPLE
    seed: int = 42
    min_count: int = 5
    workers: int = 1
    init_noise: float = 0.1

    def __post_init__(self):
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class TrainStats:
    epoch_losses: list[float] = field(default_factory=list)
    pairs: int = 0
    wall_time: float = 0.0


# ---------------------------------------------------------------------------
# reference math


def context_state(store: EmbeddingStore, context: Sequence[int]) -> np.ndarray:
    """Uniform mixture of the context words' densities."""
    if len(context) == 0:
        raise ValueError("context is empty")
    return mixture_average((1.0, store.density(c)) for c in context)


def pair_loss(store: EmbeddingStore, center: int, rho_c: np.ndarray,
              negatives: Sequence[int], eps: float = EPS) -> float:
    s_pos = float(np.sum(rho_c * store.density(center)))
    loss = -np.log(s_pos + eps)
    for q in negatives:
        s_neg = float(np.sum(rho_c * store.density(q)))
        loss -= np.log(1.0 - s_neg + eps)
    return float(loss)


def factor_gradient(L: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the lower-triangular ``L`` of a loss with ``dloss/drho = G``."""
    L = np.tril(L)
    t = float(np.sum(L * L))
    rho = (L @ L.T) / t
    return np.tril((2.0 / t) * (G @ L - float(np.sum(G * rho)) * L))


def pair_gradients(store: EmbeddingStore, center: int, context: Sequence[int],
                   negatives: Sequence[int], eps: float = EPS) -> dict[int, np.ndarray]:
    """Packed lower-triangle gradients of :func:`pair_loss` for every word touched.

    A word playing several roles (say a context word also drawn as a
    negative) gets the sum of its contributions.
    """
    rho_c = context_state(store, context)
    rho_w = store.density(center)
    s_pos = float(np.sum(rho_c * rho_w))
    G = {center: -rho_c / (s_pos + eps)}
    G_c = -rho_w / (s_pos + eps)
    for q in negatives:
        rho_q = store.density(q)
        inv = 1.0 / (1.0 - float(np.sum(rho_c * rho_q)) + eps)
        G[q] = G.get(q, 0.0) + rho_c * inv
        G_c = G_c + rho_q * inv
    for c in context:
        G[c] = G.get(c, 0.0) + G_c / len(context)
    return {
        w: pack_lower(factor_gradient(unpack_lower(store.factors[w], store.dim), g))
        for w, g in G.items()
    }


def unigram_table(vocab: Vocabulary, power: float = UNIGRAM_POWER) -> np.ndarray:
    p = np.asarray(vocab.counts, dtype=np.float64) ** power
    return p / p.sum()


def negative_sample(vocab: Vocabulary, k: int, rng: np.random.Generator,
                    center: int | None = None, probs: np.ndarray | None = None) -> list[int]:
    """Draw ``k`` ids from the unigram^0.75 distribution, redrawing the center."""
    if len(vocab) < 2:
        raise ValueError("negative sampling needs at least two words")
    if probs is None:
        probs = unigram_table(vocab)
    out = []
    while len(out) < k:
        q = int(rng.choice(len(probs), p=probs))
        if q != center:
            out.append(q)
    return out


def _draw_negatives(probs: np.ndarray, centers: np.ndarray, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`negative_sample` for a whole epoch."""
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0

    def draw(n):
        return np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), len(cdf) - 1)

    negs = draw(centers.size * k).reshape(centers.size, k)
    clash = negs == centers[:, None]
    while clash.any():
        negs[clash] = draw(int(clash.sum()))
        clash = negs == centers[:, None]
    return negs


# ---------------------------------------------------------------------------
# training loop


def train(corpus: Sequence[str], config: TrainConfig | None = None,
          vocab: Vocabulary | None = None) -> tuple[EmbeddingStore, TrainStats]:
    """Train one density matrix per word on a token stream.

    With ``workers == 1`` the result is bit-identical for a given seed. With
    more workers the stream is split into contiguous shards trained
    concurrently without locks.
    """
    config = config or TrainConfig()
    started = time.perf_counter()
    if vocab is None:
        vocab = build_vocab(corpus, config.min_count)
    if len(vocab) < 2:
        raise ValueError("training needs at least two vocabulary words")
    ids = vocab.encode(corpus)
    if ids.size < 2:
        raise ValueError("corpus yields no context pairs")

    store = init_embeddings(vocab, config.dim, config.seed, config.init_noise)
    L = store.lower()
    rng = np.random.default_rng(config.seed)
    keep = keep_probabilities(vocab, config.subsample_t)
    probs = unigram_table(vocab)
    n_raw = ids.size
    total = float(config.epochs * n_raw)
    stats = TrainStats()

    for epoch in range(config.epochs):
        if np.all(keep >= 1.0):
            raw_pos = np.arange(n_raw)
        else:
            raw_pos = np.flatnonzero(rng.random(n_raw) < keep[ids])
        seq = np.ascontiguousarray(ids[raw_pos])
        negs = _draw_negatives(probs, seq, config.negatives, rng)
        progress = (epoch * n_raw + raw_pos) / total
        alphas = config.lr * (1.0 - (1.0 - MIN_LR_FRACTION) * progress)

        loss_sum, pairs, bad = _run_epoch(L, seq, negs, alphas, config)
        if bad >= 0 or not np.isfinite(loss_sum):
            raise NumericalError(
                f"non-finite loss in epoch {epoch + 1} at position {bad} "
                f"(lr {config.lr}, dim {config.dim}); try a smaller learning rate"
            )
        if pairs == 0:
            raise ValueError("corpus yields no context pairs after subsampling")
        mean = loss_sum / pairs
        stats.epoch_losses.append(mean)
        stats.pairs += pairs
        log.info("epoch %d/%d: mean loss %.6f over %d pairs", epoch + 1, config.epochs, mean, pairs)

    if not np.all(np.isfinite(L)):
        raise NumericalError("non-finite parameters after training")
    rows, cols = np.tril_indices(config.dim)
    store.factors = np.ascontiguousarray(L[:, rows, cols])
    stats.wall_time = time.perf_counter() - started
    return store, stats


def _run_epoch(L, seq, negs, alphas, config):
    n = seq.size
    if config.workers == 1 or n < 2 * config.workers:
        return _kernel.train_span(L, seq, negs, alphas, config.window, EPS, 0, n)

    bounds = np.linspace(0, n, config.workers + 1).astype(np.int64)
    results = [None] * config.workers

    def work(i):
        results[i] = _kernel.train_span(
            L, seq, negs, alphas, config.window, EPS, int(bounds[i]), int(bounds[i + 1])
        )

    threads = [threading.Thread(target=work, args=(i,)) for i in range(config.workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    loss_sum = sum(r[0] for r in results)
    pairs = sum(r[1] for r in results)
    bad = max(r[2] for r in results)
    return loss_sum, pairs, bad


def similarity_matrix(store: EmbeddingStore, ids=None) -> np.ndarray:
    """Pairwise ``Tr(rho_i rho_j)`` for the given (default all) word ids."""
    rho = store.densities(ids)
    flat = rho.reshape(rho.shape[0], -1)
    return flat @ flat.T


def densities_valid(store: EmbeddingStore) -> bool:
    """True when every factor has a nonnegative diagonal and a nonzero trace."""
    L = store.lower()
    diag = np.diagonal(L, axis1=1, axis2=2)
    return bool(np.all(diag >= 0) and np.all(np.sum(L * L, axis=(1, 2)) > 0))

