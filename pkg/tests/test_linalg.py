from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardy_witness.linalg import (
    DensityOperator,
    Ket,
    PovmSet,
    canonical_phase,
    complex_to_pairs,
    isometry_rows,
    kron_all,
    orthogonal_complement,
    pairs_to_complex,
    partial_trace,
    permute_subsystems,
    random_pure_state,
    random_rank1_povm,
    random_unitary,
    schmidt_decompose,
    schmidt_rank,
    tensor_product,
    unitary_from_params,
)

SQ = 1 / np.sqrt(2)


def bell() -> Ket:
    return Ket((2, 2), [SQ, 0, 0, SQ])


class TestKet:
    def test_normalize_unit_norm(self):
        k = Ket.normalize([3, 4j])
        assert abs(k.norm - 1) < 1e-12

    def test_length_must_match_dims(self):
        with pytest.raises(ValueError):
            Ket((2, 2), [1, 0, 0])

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            Ket.normalize([0, 0])

    def test_canonical_phase_makes_largest_entry_positive(self):
        v = canonical_phase(np.array([0.1j, -0.9]))
        assert v[1].real > 0 and abs(v[1].imag) < 1e-15

    def test_amplitudes_read_only(self):
        k = Ket.basis(0, (2,))
        with pytest.raises(ValueError):
            k.amplitudes[0] = 2


class TestDensityOperator:
    def test_from_ket_is_projector(self):
        rho = bell().density()
        assert np.allclose(rho.matrix @ rho.matrix, rho.matrix)
        assert rho.rank() == 1

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            DensityOperator((2,), [[1, 1], [0, 0]])

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityOperator((2,), np.eye(2))

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="negative"):
            DensityOperator((2,), np.diag([1.5, -0.5]))

    def test_mixture(self):
        rho = DensityOperator.mixture([0.5, 0.5], [Ket.basis(0, (2,)).density(), Ket.basis(1, (2,)).density()])
        assert np.allclose(rho.matrix, np.eye(2) / 2)


class TestTensorProduct:
    def test_basis_kets(self):
        k = tensor_product(Ket.basis(0, (2,)), Ket.basis(1, (2,)))
        assert k.dims == (2, 2)
        assert np.allclose(k.amplitudes, [0, 1, 0, 0])

    def test_identities(self):
        assert np.allclose(tensor_product(np.eye(2), np.eye(2)), np.eye(4))

    def test_distributive(self):
        plus = Ket((2,), [SQ, SQ])
        assert np.allclose(tensor_product(plus, Ket.basis(0, (2,))).amplitudes, [SQ, 0, SQ, 0])

    def test_density_operators(self):
        rho = tensor_product(Ket.basis(0, (2,)).density(), Ket.basis(1, (3,)).density())
        assert isinstance(rho, DensityOperator) and rho.dims == (2, 3)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_associative(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_pure_state(d, rng) for d in (2, 3, 2))
        left = tensor_product(tensor_product(a, b), c)
        right = tensor_product(a, tensor_product(b, c))
        assert np.max(np.abs(left.amplitudes - right.amplitudes)) < 1e-12
        assert np.allclose(kron_all(a, b, c).amplitudes, left.amplitudes)


class TestSchmidt:
    def test_bell(self):
        s = schmidt_decompose(bell())
        assert np.allclose(s.coefficients, [SQ, SQ]) and s.rank == 2

    def test_product(self):
        s = schmidt_decompose(Ket.basis(1, (2, 2)))
        assert s.rank == 1 and abs(s.coefficients[0] - 1) < 1e-12

    def test_max_entangled_qutrits(self):
        k = Ket.normalize([1, 0, 0, 0, 1, 0, 0, 0, 1], (3, 3))
        assert schmidt_rank(k) == 3

    def test_bad_cut(self):
        with pytest.raises(ValueError):
            schmidt_decompose(bell(), cut=2)

    @given(st.integers(0, 2**31 - 1), st.sampled_from([(2, 2), (2, 3), (3, 3), (6, 6)]))
    @settings(max_examples=40, deadline=None)
    def test_round_trip_and_orthonormality(self, seed, dims):
        psi = Ket(dims, random_pure_state(dims[0] * dims[1], seed).amplitudes)
        s = schmidt_decompose(psi)
        assert abs(np.sum(s.coefficients**2) - 1) < 1e-10
        assert abs(abs(psi.inner(s.reconstruct())) - 1) < 1e-10
        for vecs in (s.left_vectors, s.right_vectors):
            gram = np.array([[u.inner(v) for v in vecs] for u in vecs])
            assert np.max(np.abs(gram - np.eye(len(vecs)))) < 1e-10
        assert list(s.coefficients) == sorted(s.coefficients, reverse=True)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_product_has_rank_one(self, seed):
        rng = np.random.default_rng(seed)
        assert schmidt_rank(tensor_product(random_pure_state(2, rng), random_pure_state(3, rng))) == 1

    def test_deterministic_output(self):
        psi = Ket((2, 3), random_pure_state(6, 4).amplitudes)
        a, b = schmidt_decompose(psi), schmidt_decompose(psi)
        assert all(np.array_equal(u.amplitudes, v.amplitudes) for u, v in zip(a.left_vectors, b.left_vectors))


class TestPartialTrace:
    def test_bell_marginal(self):
        assert np.allclose(partial_trace(bell().density(), [0]).matrix, np.eye(2) / 2)

    def test_product(self):
        assert np.allclose(partial_trace(Ket.basis(1, (2, 2)).density(), [0]).matrix, np.diag([1, 0]))

    def test_trace_preserved(self):
        rho = Ket((2, 3), random_pure_state(6, 1).amplitudes).density()
        assert abs(np.trace(partial_trace(rho, [1]).matrix) - 1) < 1e-12

    def test_empty_keep(self):
        with pytest.raises(ValueError):
            partial_trace(bell().density(), [])

    def test_permute_subsystems(self):
        k = tensor_product(Ket.basis(0, (2,)), Ket.basis(2, (3,)))
        swapped = permute_subsystems(k, [1, 0])
        assert swapped.dims == (3, 2)
        assert np.allclose(swapped.amplitudes, tensor_product(Ket.basis(2, (3,)), Ket.basis(0, (2,))).amplitudes)


class TestPovm:
    def test_incomplete_rejected(self):
        with pytest.raises(ValueError, match="identity"):
            PovmSet(2, (np.diag([1, 0]), np.diag([0, 0.5])))

    def test_non_positive_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            PovmSet(2, (np.diag([1.5, 0]), np.diag([-0.5, 1])))

    def test_random_rank1_deterministic(self):
        a, b = random_rank1_povm(2, 3, 11), random_rank1_povm(2, 3, 11)
        assert all(np.array_equal(x, y) for x, y in zip(a.effects, b.effects))

    def test_random_rank1_ranks(self):
        assert random_rank1_povm(2, 3, 5).ranks() == [1, 1, 1]

    def test_too_few_outcomes(self):
        with pytest.raises(ValueError):
            random_rank1_povm(2, 1, 0)

    @given(st.integers(0, 2**31 - 1), st.integers(2, 3), st.integers(0, 2))
    @settings(max_examples=30, deadline=None)
    def test_constructors_complete(self, seed, d, extra):
        for povm in (random_rank1_povm(d, d + extra, seed), PovmSet.from_basis(random_unitary(d, np.random.default_rng(seed)))):
            total = sum(povm.effects)
            assert np.max(np.abs(total - np.eye(d))) < 1e-10
            assert min(np.linalg.eigvalsh(e)[0] for e in povm.effects) > -1e-10

    def test_relabeled(self):
        p = PovmSet.from_basis(np.eye(2))
        assert np.allclose(p.relabeled([1, 0]).effects[0], np.diag([0, 1]))


class TestHelpers:
    def test_unitary_from_params(self):
        u = unitary_from_params(np.random.default_rng(0).standard_normal(9), 3)
        assert np.allclose(u @ u.conj().T, np.eye(3))
        assert np.allclose(unitary_from_params(np.zeros(4), 2), np.eye(2))

    def test_isometry_rows(self):
        v = isometry_rows(np.random.default_rng(1).standard_normal((2, 5)))
        assert np.allclose(v @ v.conj().T, np.eye(2))

    def test_orthogonal_complement(self):
        rows = np.array([[1, 0, 0], [0, 1j, 0]])
        span, comp = orthogonal_complement(rows, 3)
        assert span == 2 and comp.shape == (3, 1)
        assert np.allclose(np.abs(comp[:, 0]), [0, 0, 1])
        assert np.allclose(rows.conj() @ comp, 0)

    def test_complex_pairs_round_trip(self):
        m = np.random.default_rng(2).standard_normal((3, 3)) + 1j
        assert np.array_equal(pairs_to_complex(complex_to_pairs(m)), m)

    def test_pairs_shape_mismatch(self):
        with pytest.raises(ValueError):
            pairs_to_complex({"shape": [2, 2], "data": [[0, 0]]})
