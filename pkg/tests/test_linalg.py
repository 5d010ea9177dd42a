import math

import numpy as np
import pytest

from conftest import random_density, random_factor, random_pure
from qlm.errors import DensityError
from qlm.linalg import (
    check_density,
    cholesky_to_density,
    density_from_mixture,
    density_to_cholesky,
    hs_similarity,
    is_density,
    mixing_bounds,
    mixture_average,
    n_lower,
    pack_lower,
    partial_trace,
    shannon_entropy,
    tensor_product,
    uhlmann_fidelity,
    unpack_lower,
    von_neumann_entropy,
)

E3 = np.eye(3)
E6 = np.eye(6)


def example_vector_3_2():
    quantum_state = (E6[0] + E6[2]) / np.sqrt(2)
    word_mapping = (E6[4] + E6[5]) / np.sqrt(2)
    return density_from_mixture([(1 / 6, quantum_state), (5 / 6, word_mapping)])


def nested_kron(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n * m, n * m))
    for i in range(n):
        for j in range(n):
            for k in range(m):
                for l in range(m):
                    out[i * m + k, j * m + l] = a[i, j] * b[k, l]
    return out


# ---------------------------------------------------------------------------
# density_from_mixture


def test_mixture_sememe_counts():
    rho = density_from_mixture([(6 / 40, E3[0]), (25 / 40, E3[1]), (9 / 40, E3[2])])
    np.testing.assert_allclose(rho, np.diag([0.15, 0.625, 0.225]), atol=1e-12, rtol=0)


def test_mixture_pure_basis_state():
    rho = density_from_mixture([(1.0, np.eye(5)[0])])
    expected = np.zeros((5, 5))
    expected[0, 0] = 1.0
    np.testing.assert_array_equal(rho, expected)


def test_mixture_common_substrate_blocks():
    rho = example_vector_3_2()
    np.testing.assert_allclose(rho[np.ix_([0, 2], [0, 2])], np.full((2, 2), 1 / 12), atol=1e-15)
    np.testing.assert_allclose(rho[np.ix_([4, 5], [4, 5])], np.full((2, 2), 5 / 12), atol=1e-15)
    assert rho[1].sum() == 0 and rho[3].sum() == 0
    check_density(rho)


@pytest.mark.parametrize(
    "components, match",
    [
        ([(0.5, E3[0]), (0.5, np.eye(4)[0])], "dimension"),
        ([(0.5, E3[0]), (0.4, E3[1])], "sum"),
        ([(1.0, 2 * E3[0])], "normalized"),
        ([], "at least one"),
    ],
)
def test_mixture_errors(components, match):
    with pytest.raises(DensityError, match=match):
        density_from_mixture(components)


# ---------------------------------------------------------------------------
# Cholesky parametrization


def test_cholesky_identity_is_maximally_mixed():
    np.testing.assert_allclose(cholesky_to_density(np.eye(8)), np.eye(8) / 8, atol=1e-15)


def test_cholesky_single_entry():
    L = np.zeros((4, 4))
    L[0, 0] = 3.0
    expected = np.zeros((4, 4))
    expected[0, 0] = 1.0
    np.testing.assert_array_equal(cholesky_to_density(L), expected)


def test_cholesky_reads_packed_and_lower_only(rng):
    L = random_factor(rng, 5)
    noisy = L + np.triu(rng.normal(size=(5, 5)), 1)
    np.testing.assert_array_equal(cholesky_to_density(noisy), cholesky_to_density(L))
    np.testing.assert_array_equal(cholesky_to_density(pack_lower(L)), cholesky_to_density(L))


def test_cholesky_zero_factor_rejected():
    with pytest.raises(DensityError):
        cholesky_to_density(np.zeros((3, 3)))


def test_cholesky_outputs_are_densities(rng):
    for _ in range(1000):
        rho = cholesky_to_density(random_factor(rng, 8, scale=rng.uniform(0.01, 10)))
        assert np.max(np.abs(rho - rho.T)) <= 1e-12
        assert abs(np.trace(rho) - 1) <= 1e-12
        assert np.linalg.eigvalsh(rho)[0] >= -1e-10


def test_pack_roundtrip(rng):
    L = random_factor(rng, 6)
    packed = pack_lower(L)
    assert packed.shape == (n_lower(6),) == (21,)
    np.testing.assert_array_equal(unpack_lower(packed), L)


def test_refactor_diagonal():
    L = density_to_cholesky(np.diag([0.15, 0.625, 0.225]))
    np.testing.assert_allclose(L, np.diag(np.sqrt([0.15, 0.625, 0.225])), atol=1e-15)


def test_refactor_identity_roundtrip():
    rho = np.eye(8) / 8
    assert np.max(np.abs(cholesky_to_density(density_to_cholesky(rho)) - rho)) <= 1e-12


def test_refactor_rank_deficient_roundtrip():
    rho = example_vector_3_2()
    L = density_to_cholesky(rho)
    assert np.all(np.diag(L) >= 0)
    assert np.allclose(L, np.tril(L))
    # reconstruct by hand rather than through cholesky_to_density
    rebuilt = L @ L.T
    rebuilt /= np.trace(rebuilt)
    assert np.max(np.abs(rebuilt - rho)) <= 1e-8


def test_refactor_zero_floor_on_singular_input():
    rho = example_vector_3_2()
    L = density_to_cholesky(rho, eig_floor=0.0)
    assert np.max(np.abs(cholesky_to_density(L) - rho)) <= 1e-12


def test_refactor_random_roundtrip(rng):
    for d in (2, 4, 8):
        for rank in (1, d // 2, d):
            rho = random_density(rng, d, rank)
            assert np.max(np.abs(cholesky_to_density(density_to_cholesky(rho)) - rho)) <= 1e-8


def test_refactor_errors():
    with pytest.raises(DensityError, match="symmetric"):
        density_to_cholesky(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(DensityError, match="trace"):
        density_to_cholesky(np.eye(2))


# ---------------------------------------------------------------------------
# validation


def test_check_density_rejects_each_invariant():
    with pytest.raises(DensityError, match="symmetric"):
        check_density(np.array([[0.5, 1e-9], [0.0, 0.5]]))
    with pytest.raises(DensityError, match="trace"):
        check_density(np.diag([0.5, 0.6]))
    with pytest.raises(DensityError, match="semidefinite"):
        check_density(np.diag([1.1, -0.1]))
    assert is_density(np.eye(3) / 3)


# ---------------------------------------------------------------------------
# similarity


def test_hs_pure_states(rng):
    a = random_pure(rng, 4)
    rho = np.outer(a, a)
    assert hs_similarity(rho, rho) == pytest.approx(1.0, abs=1e-14)
    b = np.array([-a[1], a[0], 0, 0])
    b /= np.linalg.norm(b)
    orth = np.outer(b, b)
    assert hs_similarity(rho, orth) == pytest.approx(0.0, abs=1e-15)


def test_hs_sememe_example():
    vector = np.diag([0.15, 0.625, 0.225])
    computer = np.diag([0.285, 0.25, 0.465])
    oracle = sum(v * c for v, c in zip([0.15, 0.625, 0.225], [0.285, 0.25, 0.465]))
    assert hs_similarity(vector, computer) == pytest.approx(oracle, abs=1e-15)


def test_computer_example_table_is_inconsistent():
    # the listed probabilities do not sum to one, so they cannot produce the
    # printed diagonal; the printed diagonal itself is a valid state
    listed = [1 / 7, 1 / 4, 13 / 28]
    assert sum(listed) == pytest.approx(6 / 7)
    with pytest.raises(DensityError):
        density_from_mixture(list(zip(listed, E3)))
    printed = np.diag([0.285, 0.25, 0.465])
    check_density(printed)
    # swapping in 2/7 for the first entry normalizes it and matches to print precision
    swapped = density_from_mixture(list(zip([2 / 7, 1 / 4, 13 / 28], E3)))
    assert np.max(np.abs(swapped - printed)) < 1e-3


def test_hs_properties(rng):
    for d in (2, 3, 8):
        rho, sigma = random_density(rng, d), random_density(rng, d)
        assert hs_similarity(rho, sigma) == pytest.approx(hs_similarity(sigma, rho), abs=1e-15)
        purity = hs_similarity(rho, rho)
        assert purity == pytest.approx(np.trace(rho @ rho), abs=1e-14)
        assert 1 / d - 1e-12 <= purity <= 1 + 1e-12


def test_hs_dimension_mismatch():
    with pytest.raises(DensityError, match="mismatch"):
        hs_similarity(np.eye(2) / 2, np.eye(3) / 3)


def test_uhlmann_self_fidelity(rng):
    for d in (2, 5, 8):
        rho = random_density(rng, d)
        assert uhlmann_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-8)


def test_uhlmann_commuting_closed_form(rng):
    assert uhlmann_fidelity(np.diag([0.5, 0.5]), np.diag([1.0, 0.0])) == pytest.approx(0.5, abs=1e-12)
    for _ in range(20):
        p = rng.dirichlet(np.ones(6))
        q = rng.dirichlet(np.ones(6))
        expected = np.sum(np.sqrt(p * q)) ** 2
        assert uhlmann_fidelity(np.diag(p), np.diag(q)) == pytest.approx(expected, abs=1e-10)


def test_uhlmann_pure_states(rng):
    for _ in range(50):
        a, b = random_pure(rng, 8), random_pure(rng, 8)
        f = uhlmann_fidelity(np.outer(a, a), np.outer(b, b))
        assert f == pytest.approx(np.dot(a, b) ** 2, abs=1e-10)


def test_uhlmann_symmetric_and_bounded(rng):
    for _ in range(20):
        rho, sigma = random_density(rng, 4), random_density(rng, 4)
        f = uhlmann_fidelity(rho, sigma)
        assert 0 <= f <= 1
        assert f == pytest.approx(uhlmann_fidelity(sigma, rho), abs=1e-9)


def test_uhlmann_equals_hs_when_one_is_pure(rng):
    a = random_pure(rng, 4)
    sigma = random_density(rng, 4)
    assert uhlmann_fidelity(np.outer(a, a), sigma) == pytest.approx(hs_similarity(np.outer(a, a), sigma), abs=1e-10)


# ---------------------------------------------------------------------------
# entropy


def test_entropy_pure_state(rng):
    a = random_pure(rng, 8)
    assert von_neumann_entropy(np.outer(a, a)) <= 1e-12


def test_entropy_maximally_mixed():
    rho = np.eye(8) / 8
    assert von_neumann_entropy(rho) == pytest.approx(math.log(8), abs=1e-12)
    assert von_neumann_entropy(rho, "two") == pytest.approx(3.0, abs=1e-12)
    assert von_neumann_entropy(rho, "2") == von_neumann_entropy(rho, "two")


def test_entropy_sememe_example():
    p = [0.15, 0.625, 0.225]
    oracle = -sum(x * math.log(x) for x in p)
    assert oracle == pytest.approx(0.91394, abs=1e-5)
    assert von_neumann_entropy(np.diag(p)) == pytest.approx(oracle, abs=1e-12)


def test_entropy_bounded_by_log_dim(rng):
    for d in (2, 3, 8):
        s = von_neumann_entropy(random_density(rng, d))
        assert 0 <= s <= math.log(d) + 1e-12


def test_entropy_unknown_base():
    with pytest.raises(ValueError):
        von_neumann_entropy(np.eye(2) / 2, "ten")


def test_entropy_additive_on_products(rng):
    for d1, d2 in [(2, 3), (4, 4), (8, 2)]:
        rho, sigma = random_density(rng, d1), random_density(rng, d2)
        joint = von_neumann_entropy(tensor_product(rho, sigma))
        assert joint == pytest.approx(von_neumann_entropy(rho) + von_neumann_entropy(sigma), abs=1e-8)


def test_entropy_concavity_and_mixing_bounds(rng):
    for _ in range(100):
        n = int(rng.integers(2, 6))
        d = int(rng.choice([2, 4, 8]))
        w = rng.dirichlet(np.ones(n))
        states = [random_density(rng, d, rank=int(rng.integers(1, d + 1))) for _ in range(n)]
        s = von_neumann_entropy(mixture_average(zip(w, states)))
        avg = sum(wi * von_neumann_entropy(r) for wi, r in zip(w, states))
        shannon = -sum(wi * math.log(wi) for wi in w)
        assert s >= avg - 1e-8
        assert s <= avg + shannon + 1e-8
        lo, hi = mixing_bounds(w, states)
        assert lo == pytest.approx(avg, abs=1e-12)
        assert hi == pytest.approx(avg + shannon, abs=1e-12)


def test_shannon_entropy():
    assert shannon_entropy([0.5, 0.5], "two") == pytest.approx(1.0)
    assert shannon_entropy([1.0, 0.0]) == 0.0


# ---------------------------------------------------------------------------
# composition


def test_tensor_basis_case():
    out = tensor_product(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    expected = np.zeros((4, 4))
    expected[1, 1] = 1.0
    np.testing.assert_array_equal(out, expected)


def test_tensor_with_trivial_system(rng):
    rho = random_density(rng, 5)
    np.testing.assert_array_equal(tensor_product(rho, np.ones((1, 1))), rho)


def test_tensor_sememe_pair_matches_nested_loop():
    vector = np.diag([0.15, 0.625, 0.225])
    computer = np.diag([0.285, 0.25, 0.465])
    out = tensor_product(vector, computer)
    np.testing.assert_allclose(out, nested_kron(vector, computer), atol=1e-15)
    np.testing.assert_allclose(np.diag(out), np.outer(np.diag(vector), np.diag(computer)).ravel(), atol=1e-15)
    check_density(out)


def test_tensor_factorizes_expectations(rng):
    rho, sigma = random_density(rng, 3), random_density(rng, 4)
    A = rng.normal(size=(3, 3))
    A = A + A.T
    B = rng.normal(size=(4, 4))
    B = B + B.T
    lhs = np.trace(tensor_product(rho, sigma) @ np.kron(A, B))
    assert lhs == pytest.approx(np.trace(rho @ A) * np.trace(sigma @ B), abs=1e-12)


def test_tensor_size_cap():
    with pytest.raises(DensityError, match="cap"):
        tensor_product(np.eye(64) / 64, np.eye(65) / 65)
    assert tensor_product(np.eye(2) / 2, np.eye(2) / 2, max_dim=4).shape == (4, 4)
    with pytest.raises(DensityError):
        tensor_product(np.eye(2) / 2, np.eye(2) / 2, max_dim=3)


def test_partial_trace_recovers_factors(rng):
    p = np.diag([0.15, 0.625, 0.225])
    np.testing.assert_allclose(partial_trace(tensor_product(p, np.eye(4) / 4), (3, 4), "first"), p, atol=1e-15)
    for d1, d2 in [(2, 2), (3, 5), (8, 8)]:
        rho, sigma = random_density(rng, d1), random_density(rng, d2)
        joint = tensor_product(rho, sigma)
        assert np.max(np.abs(partial_trace(joint, (d1, d2), "first") - rho)) <= 1e-12
        assert np.max(np.abs(partial_trace(joint, (d1, d2), "second") - sigma)) <= 1e-12


def test_partial_trace_of_purification(rng):
    for _ in range(10):
        d = 4
        rho = random_density(rng, d)
        w, V = np.linalg.eigh(rho)
        # |Phi> = sum_i sqrt(w_i) |v_i> |i>
        phi = sum(np.sqrt(max(wi, 0.0)) * np.kron(V[:, i], np.eye(d)[i]) for i, wi in enumerate(w))
        reduced = partial_trace(np.outer(phi, phi), (d, d), "first")
        oracle = density_from_mixture(
            [(max(wi, 0.0) / np.clip(w, 0, None).sum(), V[:, i]) for i, wi in enumerate(w)]
        )
        assert np.max(np.abs(reduced - oracle)) <= 1e-10


def test_partial_trace_bad_dims():
    with pytest.raises(DensityError, match="factor"):
        partial_trace(np.eye(6) / 6, (4, 2))
    with pytest.raises(ValueError):
        partial_trace(np.eye(4) / 4, (2, 2), keep="middle")


# ---------------------------------------------------------------------------
# mixture_average


def test_average_single(rng):
    rho = random_density(rng, 3)
    np.testing.assert_allclose(mixture_average([(1.0, rho)]), rho, atol=1e-15)


def test_average_symmetric():
    out = mixture_average([(1.0, np.diag([1.0, 0.0])), (1.0, np.diag([0.0, 1.0]))])
    np.testing.assert_array_equal(out, np.eye(2) / 2)


def test_average_normalizes_weights(rng):
    a, b = random_density(rng, 3), random_density(rng, 3)
    np.testing.assert_allclose(mixture_average([(2.0, a), (6.0, b)]), 0.25 * a + 0.75 * b, atol=1e-15)


def test_average_errors():
    with pytest.raises(DensityError):
        mixture_average([])
    with pytest.raises(DensityError, match="mismatch"):
        mixture_average([(1.0, np.eye(2) / 2), (1.0, np.eye(3) / 3)])
    with pytest.raises(DensityError, match="zero"):
        mixture_average([(0.0, np.eye(2) / 2)])
