"""Frequency-weighted ensemble states per corpus period and their entropy series.

The ensemble of a period is ``sum_w f_w rho_w`` where ``f_w`` is the relative
frequency of word ``w`` among the period's in-vocabulary tokens. Entropy uses
``k_B = 1``.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qlm.corpus import WHITESPACE, PeriodManifest, partition_by_period
from qlm.errors import EmptyPeriodError
from qlm.linalg import NATURAL, shannon_entropy, von_neumann_entropy
from qlm.model import EmbeddingStore
from qlm.trainer import TrainConfig, train

log = logging.getLogger(__name__)

GLOBAL_MODEL = "global_model"
PER_PERIOD_MODEL = "per_period_model"
CSV_HEADER = ("period", "entropy", "tokens", "coverage")


@dataclass
class EnsembleState:
    period_name: str
    rho: np.ndarray
    token_count: int
    coverage: float
    weights: dict[int, float] = field(default_factory=dict, repr=False)

    def entropy(self, log_base: str = NATURAL) -> float:
        return von_neumann_entropy(self.rho, log_base)

    def bounds(self, store: EmbeddingStore, log_base: str = NATURAL) -> tuple[float, float]:
        """Concavity lower bound and mixing upper bound on :meth:`entropy`."""
        ids = np.fromiter(self.weights, dtype=np.int64)
        w = np.fromiter(self.weights.values(), dtype=np.float64)
        per_word = np.array([von_neumann_entropy(r, log_base) for r in store.densities(ids)])
        lower = float(np.dot(w, per_word))
        return lower, lower + shannon_entropy(w, log_base)


@dataclass
class EntropyRow:
    period: str
    entropy: float
    tokens: int
    coverage: float


@dataclass
class EntropySeries:
    rows: list[EntropyRow]
    mode: str = GLOBAL_MODEL
    log_base: str = NATURAL

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in self.rows:
                writer.writerow([r.period, repr(r.entropy), r.tokens, repr(r.coverage)])


def ensemble_state(store: EmbeddingStore, tokens: Sequence[str], period_name: str = "") -> EnsembleState:
    """Mixture of word densities weighted by in-vocabulary relative frequency."""
    tally = Counter(tokens)
    total = sum(tally.values())
    index = store.vocab.index
    counts = {index[w]: c for w, c in tally.items() if w in index}
    used = sum(counts.values())
    if used == 0:
        raise EmptyPeriodError(period_name, "no in-vocabulary tokens")
    ids = np.fromiter(counts, dtype=np.int64)
    freq = np.fromiter(counts.values(), dtype=np.float64) / used
    rho = np.einsum("n,nij->ij", freq, store.densities(ids))
    rho = 0.5 * (rho + rho.T)
    return EnsembleState(
        period_name, rho, used, used / total,
        weights=dict(zip(ids.tolist(), freq.tolist())),
    )


def period_entropy_series(
    manifest: PeriodManifest,
    store: EmbeddingStore | None = None,
    mode: str = GLOBAL_MODEL,
    train_config: TrainConfig | None = None,
    tokenizer: str = WHITESPACE,
    log_base: str = NATURAL,
) -> EntropySeries:
    """One ensemble-entropy row per manifest period, in manifest order.

    ``global_model`` scores every period with ``store``. ``per_period_model``
    trains a fresh model on each period with the same config and seed.
    """
    if mode not in (GLOBAL_MODEL, PER_PERIOD_MODEL):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == GLOBAL_MODEL and store is None:
        raise ValueError("global_model mode needs a trained store")
    rows = []
    for name, tokens in partition_by_period(manifest, tokenizer):
        model = store
        if mode == PER_PERIOD_MODEL:
            log.info("training period %r on %d tokens", name, len(tokens))
            try:
                model, _ = train(tokens, train_config or TrainConfig())
            except ValueError as exc:
                raise EmptyPeriodError(name, str(exc)) from exc
        state = ensemble_state(model, tokens, name)
        rows.append(EntropyRow(name, state.entropy(log_base), state.token_count, state.coverage))
    return EntropySeries(rows, mode, log_base)
