"""Density-matrix word embeddings: training, evaluation and ensemble entropy."""

from qlm.errors import (
    BadMagicError,
    DensityError,
    InvalidWordEncodingError,
    ModelFormatError,
    NumericalError,
    OOVError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from qlm.linalg import (
    check_density,
    cholesky_to_density,
    density_from_mixture,
    density_to_cholesky,
    hs_similarity,
    mixture_average,
    partial_trace,
    tensor_product,
    uhlmann_fidelity,
    von_neumann_entropy,
)
from qlm.model import (
    EmbeddingStore,
    Vocabulary,
    build_vocab,
    get_density,
    init_embeddings,
    load_model,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "DensityError",
    "EmbeddingStore",
    "InvalidWordEncodingError",
    "ModelFormatError",
    "NumericalError",
    "OOVError",
    "TruncatedPayloadError",
    "VersionMismatchError",
    "Vocabulary",
    "build_vocab",
    "check_density",
    "cholesky_to_density",
    "density_from_mixture",
    "density_to_cholesky",
    "get_density",
    "hs_similarity",
    "init_embeddings",
    "load_model",
    "mixture_average",
    "partial_trace",
    "save_model",
    "tensor_product",
    "uhlmann_fidelity",
    "von_neumann_entropy",
]
