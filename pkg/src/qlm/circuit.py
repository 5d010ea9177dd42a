"""Exact state-vector simulation of density-matrix encoding and the swap test.

A ``2^m x 2^m`` density matrix is encoded as a purification on ``2m`` qubits:
``m`` principal qubits carry the eigenvectors and ``m`` ancilla qubits carry
the probabilities, ``|Phi> = sum_i sqrt(p_i) |psi_i> (x) |i>``. Qubit 0 is the
most significant bit of the amplitude index.

The swap test prepares ``|0>_c (x) Phi_rho (x) Phi_sigma``, applies H on the
control, one Fredkin gate per principal-qubit pair, and H again. The control
reads 0 with probability ``(1 + Tr(rho sigma)) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qlm.errors import DensityError
from qlm.linalg import _same_dim, _square

MAX_QUBITS = 13
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if self.amplitudes.shape != (2 ** self.num_qubits,):
            raise ValueError(f"{self.num_qubits} qubits need {2 ** self.num_qubits} amplitudes")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def kron(self, other: "StateVector") -> "StateVector":
        return StateVector(self.num_qubits + other.num_qubits, np.kron(self.amplitudes, other.amplitudes))

    def probability_zero(self, qubit: int) -> float:
        t = self.amplitudes.reshape((2,) * self.num_qubits)
        return float(np.sum(np.take(t, 0, axis=qubit) ** 2))


@dataclass
class ShotResult:
    shots: int
    zeros: int

    @property
    def estimate(self) -> float:
        return self.zeros / self.shots


def qubits_for(dim: int) -> int:
    """``log2(dim)``, or :class:`DensityError` when ``dim`` is not a power of two."""
    m = int(dim).bit_length() - 1
    if dim < 2 or 2 ** m != dim:
        raise DensityError(f"dimension {dim} is not a power of two >= 2")
    return m


# ---------------------------------------------------------------------------
# gates


def apply_gate(state: StateVector, gate: np.ndarray, qubit: int) -> StateVector:
    """Apply a single-qubit gate."""
    n = state.num_qubits
    t = state.amplitudes.reshape((2,) * n)
    t = np.moveaxis(np.tensordot(gate, t, axes=([1], [qubit])), 0, qubit)
    return StateVector(n, t.reshape(-1))


def apply_cswap(state: StateVector, control: int, a: int, b: int) -> StateVector:
    """Fredkin gate: swap qubits ``a`` and ``b`` where ``control`` is 1."""
    n = state.num_qubits
    t = state.amplitudes.reshape((2,) * n).copy()
    idx = [slice(None)] * n
    idx[control] = 1
    sub = t[tuple(idx)]
    # the control axis is gone from ``sub``
    a_, b_ = (a - (a > control)), (b - (b > control))
    t[tuple(idx)] = np.swapaxes(sub, a_, b_)
    return StateVector(n, t.reshape(-1))


# ---------------------------------------------------------------------------
# encoding and swap test


def purify(rho) -> StateVector:
    """Purification of ``rho`` on ``2 log2(d)`` qubits (principal register first)."""
    rho = _square(rho)
    m = qubits_for(rho.shape[0])
    w, V = np.linalg.eigh(0.5 * (rho + rho.T))
    order = np.argsort(w)[::-1]
    w, V = np.clip(w[order], 0.0, None), V[:, order]
    total = w.sum()
    if not total > 0:
        raise DensityError("matrix has no positive eigenvalue")
    w = w / total
    # amplitude[a, i] = sqrt(p_i) * psi_i[a]
    amps = V * np.sqrt(w)
    return StateVector(2 * m, amps.reshape(-1))


def reduced_principal(state: StateVector) -> np.ndarray:
    """Trace out the ancilla half of a purification register."""
    d = int(round(np.sqrt(state.amplitudes.size)))
    psi = state.amplitudes.reshape(d, d)
    return psi @ psi.T


def swap_test_circuit(rho, sigma, max_qubits: int = MAX_QUBITS) -> StateVector:
    """Final state of the swap-test circuit; the control is qubit 0."""
    rho, sigma = _same_dim(rho, sigma)
    m = qubits_for(rho.shape[0])
    n = 4 * m + 1
    if n > max_qubits:
        raise DensityError(f"swap test on dimension {rho.shape[0]} needs {n} qubits (cap {max_qubits})")
    control = StateVector(1, np.array([1.0, 0.0]))
    state = control.kron(purify(rho)).kron(purify(sigma))
    state = apply_gate(state, HADAMARD, 0)
    # principal qubits: 1..m for rho, 2m+1..3m for sigma
    for j in range(m):
        state = apply_cswap(state, 0, 1 + j, 2 * m + 1 + j)
    return apply_gate(state, HADAMARD, 0)


def swap_test_exact(rho, sigma, max_qubits: int = MAX_QUBITS) -> float:
    """Probability that the swap-test control measures 0."""
    return swap_test_circuit(rho, sigma, max_qubits).probability_zero(0)


def swap_test_sample(rho, sigma, shots: int, seed: int = 0) -> ShotResult:
    """Sample ``shots`` control measurements of the swap test."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p0 = min(max(swap_test_exact(rho, sigma), 0.0), 1.0)
    rng = np.random.default_rng(seed)
    return ShotResult(shots, int(rng.binomial(shots, p0)))
