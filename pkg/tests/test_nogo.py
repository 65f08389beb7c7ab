from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardy_witness.hardy import Realization, hardy_evaluate, statistics_from_realization
from hardy_witness.linalg import Ket, random_pure_state, random_rank1_povm, schmidt_rank
from hardy_witness.nogo import (
    DETERMINANT_INDICES,
    Classification,
    appendix_crafted_instance,
    basis_expansion,
    build_constraints,
    classify,
    coplanar_qubit_povm,
    determinant_condition,
    eq5_crafted_instance,
    expected_product_witness,
    family_instance,
    generic_instance,
    rank2_instance,
    span_and_complement,
    sweep,
)


def constraints(family: str, dims, seed: int):
    alice, bob = family_instance(family, dims, seed)
    return build_constraints(alice, bob, *dims)


class TestBuildConstraints:
    @pytest.mark.parametrize("dims", [(2, 2), (2, 3)])
    def test_nine_product_vectors(self, dims):
        c = constraints("generic", dims, 0)
        assert len(c.vectors) == 9 and c.rank_one
        assert c.provenance[3] == (0, 1, 0, 0)  # V4 from E_1^1 (x) F_1^0
        assert all(schmidt_rank(c.vector(k)) == 1 for k in range(1, 10))

    @pytest.mark.parametrize("dims,index", [((2, 2), 2), ((2, 3), 3)])
    def test_v4_coordinates(self, dims, index):
        c = constraints("generic", dims, 1)
        x = basis_expansion(c.alice, c.bob)
        coords = x.coordinates(c.vector(4))
        expected = np.zeros(dims[0] * dims[1])
        expected[index] = 1
        assert np.allclose(np.abs(coords), expected, atol=1e-10)

    def test_rank_two_support(self):
        alice, bob = rank2_instance((2, 2), 0, slot=0)  # Alice setting 1, outcome 0
        c = build_constraints(alice, bob, 2, 2)
        sizes = [len(entry) for entry in c.vectors]
        hit = [k for k, (i, m, _, _) in enumerate(c.provenance) if (i, m) == (0, 0)]
        assert all(sizes[k] == 2 for k in hit)
        assert not c.rank_one

    def test_wrong_outcomes(self):
        alice, bob = generic_instance((2, 2), 0)
        with pytest.raises(ValueError):
            build_constraints((random_rank1_povm(2, 2, 0), alice[1]), bob, 2, 2)

    def test_unsupported_dims(self):
        alice, bob = generic_instance((3, 3), 0)
        with pytest.raises(ValueError):
            build_constraints(alice, bob, 3, 3)


class TestExpansion:
    @pytest.mark.parametrize("dims", [(2, 2), (2, 3)])
    def test_reconstruction_and_ray_norms(self, dims):
        alice, bob = generic_instance(dims, 7)
        x = basis_expansion(alice, bob)
        for key, ray in x.alice_rays.items():
            assert np.allclose(x.reconstruct_alice(*key), ray, atol=1e-10)
        for key, ray in x.bob_rays.items():
            assert np.allclose(x.reconstruct_bob(*key), ray, atol=1e-10)
        for row in x.normalized_rows().values():
            assert abs(np.sum(np.abs(row) ** 2) - 1) < 1e-10

    def test_dual_basis(self):
        x = basis_expansion(*generic_instance((2, 3), 3))
        for side, basis in (("alice", x.alice_basis), ("bob", x.bob_basis)):
            assert np.allclose(x.dual_basis(side).conj().T @ basis, np.eye(basis.shape[1]))


class TestSpan:
    def test_generic_full_span(self):
        for seed in range(50):
            r = span_and_complement(constraints("generic", (2, 2), seed))
            assert (r.span_dim, r.complement_dim) == (4, 0)

    def test_crafted_spans(self):
        assert span_and_complement(constraints("eq5-crafted", (2, 2), 0)).span_dim == 3
        assert span_and_complement(constraints("appendix-crafted", (2, 3), 0)).span_dim == 5

    @pytest.mark.parametrize("family,dims", [("generic", (2, 3)), ("rank2-case", (2, 2)), ("eq5-crafted", (2, 2))])
    def test_dims_add_up(self, family, dims):
        r = span_and_complement(constraints(family, dims, 4))
        assert r.span_dim + r.complement_dim == dims[0] * dims[1]


class TestDeterminant:
    @pytest.mark.parametrize("k", DETERMINANT_INDICES)
    def test_closed_forms(self, k):
        for seed in range(30):
            numeric, closed = determinant_condition(constraints("generic", (2, 2), seed), k)
            assert abs(numeric - closed) <= 1e-10 * max(1.0, abs(closed))

    def test_vanishes_when_gamma_zero(self):
        c = constraints("eq5-crafted", (2, 2), 2)
        numeric, closed = determinant_condition(c, 7)
        assert abs(numeric) < 1e-12 and abs(closed) < 1e-12

    def test_generic_nonzero(self):
        values = [abs(determinant_condition(constraints("generic", (2, 2), s), 7)[0]) for s in range(200)]
        assert min(values) > 1e-6

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            determinant_condition(constraints("generic", (2, 2), 0), 4)


class TestClassify:
    def test_generic(self):
        assert classify(constraints("generic", (2, 2), 0)).classification is Classification.NO_HARDY_STATE

    @pytest.mark.parametrize("family,dims", [("eq5-crafted", (2, 2)), ("appendix-crafted", (2, 3))])
    def test_crafted_witness(self, family, dims):
        for seed in range(20):
            c = constraints(family, dims, seed)
            r = classify(c)
            assert r.classification is Classification.PRODUCT_ONLY
            assert r.max_schmidt_coeff_gap <= 1e-8
            expected = expected_product_witness(basis_expansion(c.alice, c.bob))
            assert r.witness_state.fidelity(expected) >= 1 - 1e-9

    def test_printed_coefficient_order_is_not_orthogonal(self):
        # (alpha, -beta) in place of (conj beta, -conj alpha) leaves V6 unsatisfied
        c = constraints("appendix-crafted", (2, 3), 0)
        x = basis_expansion(c.alice, c.bob)
        a, b = x.alpha(0, 2), x.beta(0, 2)
        alt = np.kron(a * x.dual_basis("alice")[:, 0] - b * x.dual_basis("alice")[:, 1], x.dual_basis("bob")[:, 1])
        assert abs(np.vdot(c.vector(6).amplitudes, alt)) > 1e-6

    @pytest.mark.parametrize("family,dims", [("eq5-crafted", (2, 2)), ("appendix-crafted", (2, 3))])
    def test_complement_states_meet_zero_conditions(self, family, dims):
        alice, bob = family_instance(family, dims, 5)
        r = classify(build_constraints(alice, bob, *dims))
        for ket in r.complement_basis:
            report = hardy_evaluate(statistics_from_realization(Realization(ket, alice, bob)))
            assert max(report.zero_residuals) <= 1e-9

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_states_off_the_complement_violate(self, seed):
        alice, bob = generic_instance((2, 2), seed)
        state = Ket((2, 2), random_pure_state(4, seed).amplitudes)
        report = hardy_evaluate(statistics_from_realization(Realization(state, alice, bob)))
        assert max(report.zero_residuals) > 1e-9

    def test_classify_deterministic(self):
        c = constraints("appendix-crafted", (2, 3), 1)
        assert classify(c).max_schmidt_coeff_gap == classify(c).max_schmidt_coeff_gap


class TestFamilies:
    def test_coplanar_povm_keeps_rays(self):
        rng = np.random.default_rng(0)
        first, second = random_pure_state(2, rng).amplitudes, random_pure_state(2, rng).amplitudes
        povm = coplanar_qubit_povm(first, second, rng)
        assert povm.ranks() == [1, 1, 1]
        assert abs(abs(np.vdot(first, povm.effects[0] @ first)) - np.trace(povm.effects[0]).real) < 1e-10

    def test_crafted_instances_are_valid(self):
        for seed in range(10):
            eq5_crafted_instance(seed)
            appendix_crafted_instance(seed)

    def test_family_dims_checked(self):
        with pytest.raises(ValueError):
            family_instance("eq5-crafted", (2, 3), 0)
        with pytest.raises(ValueError):
            family_instance("nope", (2, 2), 0)

    @pytest.mark.parametrize("dims", [(2, 2), (2, 3)])
    def test_rank2_sweep_never_entangled(self, dims):
        entries = sweep("rank2-case", dims, 24, seed=100)
        assert not any(e.entangled_complement for e in entries)
