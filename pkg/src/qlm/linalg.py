"""Real density matrices: construction, validation, similarity, entropy, composition.

Every function here is pure and works on plain ``numpy`` arrays. A density
matrix is a square float64 array that is symmetric, positive semidefinite and
has unit trace. Validation is explicit (:func:`check_density`) and is not run
implicitly by the other functions.

A Cholesky factor is a lower-triangular ``d x d`` array with a nonnegative
diagonal. On disk and inside an :class:`~qlm.model.EmbeddingStore` it is kept
packed as its ``d(d+1)/2`` lower-triangle entries in row-major order.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from qlm.errors import DensityError

SYMMETRY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
EIG_FLOOR = 1e-12
MAX_COMPOSITE_DIM = 4096

NATURAL = "natural"
TWO = "two"
_LOG_BASES = {NATURAL: NATURAL, "e": NATURAL, TWO: TWO, "2": TWO}


class MixtureComponent(NamedTuple):
    probability: float
    state: np.ndarray


# ---------------------------------------------------------------------------
# packing and validation


def n_lower(dim: int) -> int:
    """Number of free parameters in a ``dim x dim`` lower-triangular factor."""
    return dim * (dim + 1) // 2


def dim_from_packed(n: int) -> int:
    d = int((math.isqrt(8 * n + 1) - 1) // 2)
    if n_lower(d) != n:
        raise DensityError(f"{n} is not a triangular number")
    return d


def pack_lower(L: np.ndarray) -> np.ndarray:
    L = np.asarray(L, dtype=np.float64)
    return L[np.tril_indices(L.shape[0])].copy()


def unpack_lower(packed: np.ndarray, dim: int | None = None) -> np.ndarray:
    packed = np.asarray(packed, dtype=np.float64)
    if dim is None:
        dim = dim_from_packed(packed.shape[-1])
    L = np.zeros(packed.shape[:-1] + (dim, dim))
    rows, cols = np.tril_indices(dim)
    L[..., rows, cols] = packed
    return L


def _square(rho, name="matrix") -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise DensityError(f"{name} must be a nonempty square matrix, got shape {rho.shape}")
    return rho


def check_density(
    rho,
    symmetry_tol: float = SYMMETRY_TOL,
    trace_tol: float = TRACE_TOL,
    psd_tol: float = PSD_TOL,
) -> np.ndarray:
    """Validate ``rho`` as a density matrix and return it as a float array.

    Raises
    ------
    DensityError
        If ``rho`` is not square, not symmetric, not unit trace, or has an
        eigenvalue below ``psd_tol``. The message names the violated invariant.
    """
    rho = _square(rho)
    asym = float(np.max(np.abs(rho - rho.T)))
    if asym > symmetry_tol:
        raise DensityError(f"not symmetric: max asymmetry {asym:.3e}")
    tr = float(np.trace(rho))
    if abs(tr - 1.0) > trace_tol:
        raise DensityError(f"trace {tr!r} deviates from 1")
    lo = float(np.linalg.eigvalsh(rho)[0])
    if lo < psd_tol:
        raise DensityError(f"not positive semidefinite: min eigenvalue {lo:.3e}")
    return rho


def is_density(rho, **tols) -> bool:
    try:
        check_density(rho, **tols)
    except DensityError:
        return False
    return True


def _same_dim(rho, sigma):
    rho, sigma = _square(rho, "rho"), _square(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise DensityError(f"dimension mismatch: {rho.shape[0]} vs {sigma.shape[0]}")
    return rho, sigma


def _clamped_eigvals(rho: np.ndarray) -> np.ndarray:
    return np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)


# ---------------------------------------------------------------------------
# construction


def density_from_mixture(components: Iterable) -> np.ndarray:
    """Build ``sum_i p_i |psi_i><psi_i|`` from ``(probability, state)`` pairs.

    States must be unit vectors of a common dimension and the probabilities
    must sum to one within 1e-9.
    """
    components = [MixtureComponent(float(p), np.asarray(s, dtype=np.float64)) for p, s in components]
    if not components:
        raise DensityError("mixture needs at least one component")
    dim = components[0].state.shape
    if len(dim) != 1 or dim[0] == 0:
        raise DensityError("mixture states must be nonempty 1-d vectors")
    total = 0.0
    rho = np.zeros((dim[0], dim[0]))
    for p, psi in components:
        if psi.shape != dim:
            raise DensityError(f"dimension mismatch: {psi.shape} vs {dim}")
        if p < 0.0 or p > 1.0:
            raise DensityError(f"probability {p} outside [0, 1]")
        norm = float(np.linalg.norm(psi))
        if abs(norm - 1.0) > 1e-12:
            raise DensityError(f"state is not normalized (norm {norm!r})")
        rho += p * np.outer(psi, psi)
        total += p
    if abs(total - 1.0) > 1e-9:
        raise DensityError(f"probabilities sum to {total!r}, not 1")
    return rho


def cholesky_to_density(L) -> np.ndarray:
    """Map a Cholesky factor to ``L L^T / Tr(L L^T)``.

    ``L`` may be a square matrix (only its lower triangle is read) or the
    packed lower triangle.
    """
    L = np.asarray(L, dtype=np.float64)
    if L.ndim == 1:
        L = unpack_lower(L)
    L = np.tril(_square(L, "factor"))
    A = L @ L.T
    A = 0.5 * (A + A.T)
    tr = np.trace(A)
    if not tr > 0.0:
        raise DensityError("all-zero Cholesky factor has no trace to normalize")
    return A / tr


def density_to_cholesky(rho, eig_floor: float = EIG_FLOOR) -> np.ndarray:
    """Return a lower-triangular factor ``L`` with ``cholesky_to_density(L) ~ rho``.

    Eigenvalues below ``eig_floor`` are raised to it first, so rank-deficient
    inputs still factor. The diagonal of the result is nonnegative.
    """
    rho = _square(rho)
    if eig_floor < 0:
        raise ValueError("eig_floor must be >= 0")
    asym = float(np.max(np.abs(rho - rho.T)))
    if asym > 1e-10:
        raise DensityError(f"not symmetric: max asymmetry {asym:.3e}")
    tr = float(np.trace(rho))
    if abs(tr - 1.0) > 1e-6:
        raise DensityError(f"trace {tr!r} deviates from 1 by more than 1e-6")
    w, V = np.linalg.eigh(0.5 * (rho + rho.T))
    w = np.maximum(w, eig_floor)
    # rho = B B^T with B = V sqrt(w); B^T = QR gives rho = R^T R, and R^T is
    # lower triangular. Works for singular rho where plain Cholesky fails.
    B = V * np.sqrt(w)
    R = np.linalg.qr(B.T, mode="r")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return np.tril((R * signs[:, None]).T)


# ---------------------------------------------------------------------------
# similarity and entropy


def hs_similarity(rho, sigma) -> float:
    """Trace inner product ``Tr(rho sigma)``."""
    rho, sigma = _same_dim(rho, sigma)
    return float(np.sum(rho * sigma))


def _range_factor(rho: np.ndarray) -> np.ndarray:
    """``A`` with ``rho = A A^T``, dropping eigenvalues at roundoff level."""
    w, V = np.linalg.eigh(0.5 * (rho + rho.T))
    keep = w > rho.shape[0] * np.finfo(float).eps * max(w[-1], 0.0)
    return V[:, keep] * np.sqrt(w[keep])


def uhlmann_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Computed as the squared nuclear norm of ``A^T B`` where ``rho = A A^T``
    and ``sigma = B B^T``; this avoids square roots of near-zero eigenvalues,
    which would otherwise cost about eight digits on low-rank inputs.
    """
    rho, sigma = _same_dim(rho, sigma)
    try:
        A, B = _range_factor(rho), _range_factor(sigma)
        if A.shape[1] == 0 or B.shape[1] == 0:
            return 0.0
        sv = np.linalg.svd(A.T @ B, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise DensityError(f"eigendecomposition failed: {exc}") from exc
    f = float(np.sum(sv)) ** 2
    return min(max(f, 0.0), 1.0)


def _log(x: np.ndarray, log_base: str) -> np.ndarray:
    try:
        base = _LOG_BASES[log_base]
    except KeyError:
        raise ValueError(f"unknown log base {log_base!r}; use 'natural' or 'two'") from None
    return np.log(x) if base == NATURAL else np.log2(x)


def shannon_entropy(p, log_base: str = NATURAL) -> float:
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    return float(-np.sum(p * _log(p, log_base))) + 0.0


def von_neumann_entropy(rho, log_base: str = NATURAL) -> float:
    """``S = -sum_i l_i log l_i`` over the eigenvalues of ``rho``.

    Eigenvalues are clamped to ``[0, 1]`` and ``0 log 0`` is taken as zero.
    ``log_base`` is ``"natural"`` (alias ``"e"``) or ``"two"`` (alias ``"2"``).
    """
    lam = _clamped_eigvals(_square(rho))
    return max(shannon_entropy(lam, log_base), 0.0)


def mixing_bounds(weights, states, log_base: str = NATURAL) -> tuple[float, float]:
    """Lower and upper bounds on ``S(sum_i w_i rho_i)``.

    Lower is ``sum_i w_i S(rho_i)`` (concavity), upper adds the Shannon
    entropy of the normalized weights.
    """
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    avg = float(sum(wi * von_neumann_entropy(r, log_base) for wi, r in zip(w, states)))
    return avg, avg + shannon_entropy(w, log_base)


# ---------------------------------------------------------------------------
# composition


def tensor_product(rho, sigma, max_dim: int = MAX_COMPOSITE_DIM) -> np.ndarray:
    """Kronecker product of two density matrices."""
    rho, sigma = _square(rho, "rho"), _square(sigma, "sigma")
    d = rho.shape[0] * sigma.shape[0]
    if d > max_dim:
        raise DensityError(f"composite dimension {d} exceeds cap {max_dim}")
    return np.kron(rho, sigma)


def partial_trace(rho, dims: Sequence[int], keep: str = "first") -> np.ndarray:
    """Trace out one factor of a bipartite ``d1*d2`` system.

    ``keep="first"`` returns the reduced state of the first subsystem
    (tracing out the second) and vice versa.
    """
    rho = _square(rho)
    d1, d2 = (int(x) for x in dims)
    if d1 < 1 or d2 < 1 or d1 * d2 != rho.shape[0]:
        raise DensityError(f"dims {d1}x{d2} do not factor dimension {rho.shape[0]}")
    t = rho.reshape(d1, d2, d1, d2)
    if keep == "first":
        return np.einsum("ijkj->ik", t)
    if keep == "second":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 'first' or 'second', not {keep!r}")


def mixture_average(weighted: Iterable) -> np.ndarray:
    """Convex combination ``sum_i w_i rho_i / sum_i w_i`` of ``(weight, rho)`` pairs."""
    weighted = list(weighted)
    if not weighted:
        raise DensityError("mixture_average needs at least one element")
    weights = np.array([float(w) for w, _ in weighted])
    if np.any(weights < 0):
        raise DensityError("weights must be nonnegative")
    total = weights.sum()
    if not total > 0:
        raise DensityError("weights are all zero")
    first = _square(weighted[0][1])
    out = np.zeros_like(first)
    for w, r in zip(weights, (r for _, r in weighted)):
        r = _square(r)
        if r.shape != first.shape:
            raise DensityError(f"dimension mismatch: {r.shape[0]} vs {first.shape[0]}")
        out += w * r
    return out / total
