"""Word-similarity benchmarks and nearest-neighbour queries."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from qlm.linalg import hs_similarity, uhlmann_fidelity
from qlm.model import EmbeddingStore

log = logging.getLogger(__name__)

HS = "hs"
UHLMANN = "uhlmann"
_SIMILARITIES = {HS: hs_similarity, UHLMANN: uhlmann_fidelity}


@dataclass
class SimilarityDataset:
    pairs: list[tuple[str, str, float]]
    name: str = ""

    def __len__(self):
        return len(self.pairs)


@dataclass
class EvalReport:
    pearson: float
    spearman: float
    pairs_total: int
    pairs_covered: int
    sim_kind: str

    def tsv(self) -> str:
        return f"{self.pearson:.6f}\t{self.spearman:.6f}\t{self.pairs_covered}/{self.pairs_total}"

    def __str__(self):
        return (
            f"{self.sim_kind} similarity: Pearson {self.pearson:.4f}, "
            f"Spearman {self.spearman:.4f} on {self.pairs_covered} of {self.pairs_total} pairs"
        )


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _split(line: str) -> list[str]:
    if "\t" in line:
        return [f.strip() for f in line.split("\t")]
    if "," in line:
        return [f.strip() for f in line.split(",")]
    return line.split()


def load_similarity_dataset(path, lowercase: bool = True) -> SimilarityDataset:
    """Read ``word1 <sep> word2 <sep> score`` lines (tab, comma or whitespace).

    ``#`` comments and a leading header row (non-numeric third field) are
    skipped. Malformed lines are logged with their line number and skipped.
    """
    pairs = []
    first = True
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f for f in _split(line) if f != ""]
            if first:
                first = False
                if len(fields) >= 3 and not _is_number(fields[2]):
                    continue
            if len(fields) < 3 or not _is_number(fields[2]) or not np.isfinite(float(fields[2])):
                log.warning("%s:%d: malformed line skipped: %r", path, lineno, line)
                continue
            w1, w2 = fields[0], fields[1]
            if lowercase:
                w1, w2 = w1.lower(), w2.lower()
            pairs.append((w1, w2, float(fields[2])))
    if not pairs:
        raise ValueError(f"{path}: no parsable word pairs")
    name = re.sub(r"\.[^.]*$", "", str(path).rsplit("/", 1)[-1])
    return SimilarityDataset(pairs, name)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d and of equal length")
    if x.size < 2:
        raise ValueError("correlation needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    if sx == 0 or sy == 0:
        raise ValueError("correlation undefined for zero variance")
    r = float(np.dot(dx, dy) / (sx * sy))
    return min(max(r, -1.0), 1.0)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of average ranks (ties share their mean rank)."""
    return pearson(rankdata(xs), rankdata(ys))


def evaluate(store: EmbeddingStore, dataset: SimilarityDataset, sim_kind: str = HS) -> EvalReport:
    """Correlate model similarity with human scores over in-vocabulary pairs."""
    try:
        sim = _SIMILARITIES[sim_kind]
    except KeyError:
        raise ValueError(f"unknown similarity {sim_kind!r}") from None
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    vocab = store.vocab
    model, human = [], []
    cache: dict[int, np.ndarray] = {}

    def density(i):
        if i not in cache:
            cache[i] = store.density(i)
        return cache[i]

    for w1, w2, score in dataset.pairs:
        i, j = vocab.get(w1), vocab.get(w2)
        if i is None or j is None:
            continue
        model.append(sim(density(i), density(j)))
        human.append(score)
    if len(model) < 2:
        raise ValueError(f"only {len(model)} of {len(dataset)} pairs are in vocabulary")
    return EvalReport(pearson(model, human), spearman(model, human), len(dataset), len(model), sim_kind)


def nearest_neighbors(store: EmbeddingStore, word: str, k: int = 10,
                      sim_kind: str = HS) -> list[tuple[str, float]]:
    """Top-``k`` most similar words, excluding the query; ties go to the lower id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = store.vocab[word]
    rho = store.densities()
    if sim_kind == HS:
        scores = np.einsum("ij,nij->n", rho[q], rho)
    elif sim_kind == UHLMANN:
        scores = np.array([uhlmann_fidelity(rho[q], r) for r in rho])
    else:
        raise ValueError(f"unknown similarity {sim_kind!r}")
    ids = np.arange(len(scores))
    order = np.lexsort((ids, -scores))
    order = order[order != q][:k]
    return [(store.vocab.words[i], float(scores[i])) for i in order]
