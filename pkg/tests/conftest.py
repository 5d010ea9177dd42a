import gzip
import pathlib

import numpy as np
import pytest

from qlm.linalg import cholesky_to_density
from qlm.model import Vocabulary, init_embeddings

DATA = pathlib.Path(__file__).parent / "data"


def random_factor(rng, d, scale=1.0):
    """Random lower-triangular factor with a nonnegative diagonal."""
    L = np.tril(rng.normal(scale=scale, size=(d, d)))
    L[np.diag_indices(d)] = np.abs(np.diag(L))
    return L


def random_density(rng, d, rank=None):
    if rank is None:
        return cholesky_to_density(random_factor(rng, d))
    B = rng.normal(size=(d, rank))
    A = B @ B.T
    return A / np.trace(A)


def random_pure(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_store(rng, n_words=6, dim=4):
    vocab = Vocabulary([f"w{i}" for i in range(n_words)], list(rng.integers(1, 100, size=n_words)))
    store = init_embeddings(vocab, dim, seed=int(rng.integers(1 << 30)))
    L = np.stack([random_factor(rng, dim) for _ in range(n_words)])
    rows, cols = np.tril_indices(dim)
    store.factors = np.ascontiguousarray(L[:, rows, cols])
    return store


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def wordsim_path():
    return DATA / "wordsim353.tsv"


@pytest.fixture(scope="session")
def english_corpus(tmp_path_factory):
    """The bundled public-domain English corpus, unpacked to plain UTF-8."""
    out = tmp_path_factory.mktemp("corpus") / "english_pd.txt"
    with gzip.open(DATA / "english_pd.txt.gz", "rb") as src:
        out.write_bytes(src.read())
    return out


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
