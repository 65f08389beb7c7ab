from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardy_witness.hardy import ProbabilityTable, hardy_evaluate, statistics_from_realization
from hardy_witness.linalg import Ket, partial_trace, schmidt_rank
from hardy_witness.optimizer import P_HARDY_2, optimal_table
from hardy_witness.witness import (
    EXCLUDED_DIMS,
    FlagStateSpec,
    NoRelabelingFound,
    TolerancePolicy,
    build_flag_state,
    certify,
    default_flag_experiment,
    flag_block_eigenvectors,
    flag_measurements,
    flag_realization,
    hardy_evaluate_textbook,
    optimal_textbook_pair,
    parse_weights,
    search_relabelings,
    simulate_flag_experiment,
)

BELL = Ket((2, 2), [2**-0.5, 0, 0, 2**-0.5])
IDENTITY_MAPS = (((0, 1), (0, 1)),) * 3


def bell_spec(weights) -> FlagStateSpec:
    return FlagStateSpec(weights, (BELL, BELL, BELL), IDENTITY_MAPS, IDENTITY_MAPS)


@pytest.fixture(scope="module")
def equal_flag():
    spec, per_flag = default_flag_experiment((1 / 3, 1 / 3, 1 / 3))
    return spec, per_flag, simulate_flag_experiment(spec, per_flag)


class TestPolicy:
    def test_invariants(self):
        with pytest.raises(ValueError):
            TolerancePolicy(0.0, 0.0)
        with pytest.raises(ValueError):
            TolerancePolicy(1e-3, -1e-3)

    def test_presets(self):
        assert TolerancePolicy.empirical() == TolerancePolicy(1e-3, 1e-3)
        assert TolerancePolicy.exact().zero_eps == 1e-9


class TestCertify:
    def test_d3_optimum(self):
        v = certify(optimal_table(3))
        assert v.conditions_met and v.entangled and v.rank_at_least_3
        assert set(v.dim_excludes) == set(EXCLUDED_DIMS)
        assert abs(v.success - 0.141327) < 5e-4

    def test_flag_table(self, equal_flag):
        v = certify(equal_flag[2])
        assert v.entangled and not v.rank_at_least_3 and v.dim_excludes == ()

    def test_uniform(self):
        v = certify(ProbabilityTable(3, np.full((2, 2, 3, 3), 1 / 9)))
        assert not (v.conditions_met or v.entangled or v.rank_at_least_3)

    def test_rejects_other_d(self):
        with pytest.raises(ValueError):
            certify(optimal_table(2))

    @given(st.floats(0.0, 0.2), st.floats(1e-6, 0.1), st.floats(0.0, 0.05), st.floats(0.0, 0.05))
    @settings(max_examples=60, deadline=None)
    def test_invariant_formulas(self, mix, eps, margin, noise):
        # blend the optimum toward uniform and add a forbidden-cell leak
        p = (1 - mix) * optimal_table(3).p + mix / 9
        p[1, 0, 0, 1] += noise
        p[1, 0, 2, 2] = max(p[1, 0, 2, 2] - noise, 0)
        t = ProbabilityTable(3, p)
        policy = TolerancePolicy(eps, margin)
        v = certify(t, policy)
        r = hardy_evaluate(t, eps)
        assert v.conditions_met == r.conditions_met
        assert v.rank_at_least_3 == (r.conditions_met and r.success > P_HARDY_2 + margin)
        assert v.entangled == (r.conditions_met and r.success > eps)
        assert (not v.rank_at_least_3) or v.entangled
        assert (v.dim_excludes != ()) == v.rank_at_least_3


class TestFlagState:
    def test_single_term(self):
        rho = build_flag_state(bell_spec((1, 0, 0)))
        v = np.zeros((2, 3, 2, 3), dtype=complex)
        v[:, 0, :, 0] = BELL.amplitudes.reshape(2, 2)
        assert np.allclose(rho.matrix, np.outer(v.ravel(), v.ravel().conj()))

    def test_equal_bell_spectrum(self):
        rho = build_flag_state(bell_spec((1 / 3, 1 / 3, 1 / 3)))
        assert abs(np.trace(rho.matrix) - 1) < 1e-12 and rho.rank() == 3
        blocks = flag_block_eigenvectors(rho)
        assert sorted(k for k, _, _ in blocks) == [0, 1, 2]

    def test_marginal_on_pair(self):
        weights = (0.5, 0.3, 0.2)
        xis = (BELL, Ket.normalize([1, 0, 0, 2], (2, 2)), Ket.normalize([0, 1, 1j, 0], (2, 2)))
        spec = FlagStateSpec(weights, xis, IDENTITY_MAPS, IDENTITY_MAPS)
        reduced = partial_trace(build_flag_state(spec), [0, 2])
        expected = sum(w * x.projector() for w, x in zip(weights, xis))
        assert np.allclose(reduced.matrix, expected, atol=1e-12)

    def test_eigenvectors_have_schmidt_rank_two(self, equal_flag):
        rho = build_flag_state(equal_flag[0])
        values = np.linalg.eigvalsh(rho.matrix)
        blocks = flag_block_eigenvectors(rho)
        assert abs(sum(v for _, v, _ in blocks) - 1) < 1e-12
        assert len(blocks) == int(np.sum(values > 1e-12))
        for _, value, ket in blocks:
            assert schmidt_rank(ket) == 2
            assert np.allclose(rho.matrix @ ket.amplitudes, value * ket.amplitudes)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(weights=(0.5, 0.5, 0.1)),
            dict(weights=(1.2, -0.2, 0.0)),
            dict(xi=(BELL, BELL, Ket.basis(0, (2, 2)))),
            dict(alice_relabel=(((0, 0), (0, 1)),) + IDENTITY_MAPS[1:]),
            dict(bob_relabel=(((0, 3), (0, 1)),) + IDENTITY_MAPS[1:]),
        ],
    )
    def test_spec_validation(self, kwargs):
        base = dict(weights=(1 / 3,) * 3, xi=(BELL,) * 3, alice_relabel=IDENTITY_MAPS, bob_relabel=IDENTITY_MAPS)
        base.update(kwargs)
        with pytest.raises(ValueError):
            FlagStateSpec(**base)


class TestFlagMeasurements:
    def test_complete(self, equal_flag):
        spec, per_flag, _ = equal_flag
        alice, bob = flag_measurements(spec, per_flag)
        for povm in (*alice, *bob):
            assert povm.dim == 6 and povm.outcomes == 3
            assert np.max(np.abs(sum(povm.effects) - np.eye(6))) < 1e-10

    @given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
    @settings(max_examples=20, deadline=None)
    def test_statistics_are_weighted_mixture(self, raw):
        weights = tuple(np.array(raw) / sum(raw))
        spec, per_flag = default_flag_experiment(weights)
        t = statistics_from_realization(flag_realization(spec, per_flag))
        expected = np.zeros((2, 2, 3, 3))
        for k, (w, r) in enumerate(zip(spec.weights, per_flag)):
            small = statistics_from_realization(r).p
            for i in range(2):
                for j in range(2):
                    for m in range(2):
                        for n in range(2):
                            a = spec.alice_relabel[k][i][m]
                            b = spec.bob_relabel[k][j][n]
                            expected[i, j, a, b] += w * small[i, j, m, n]
        assert np.max(np.abs(t.p - expected)) < 1e-10

    def test_wrong_per_flag_count(self, equal_flag):
        with pytest.raises(ValueError):
            flag_measurements(equal_flag[0], equal_flag[1][:2])


class TestRelabelSearch:
    def test_first_flag_targets_first_summand(self):
        _, r = optimal_textbook_pair()
        t = statistics_from_realization(r)
        alice, bob = search_relabelings([t, t, t])
        assert (alice[0][1][1], bob[0][1][1]) == (0, 1)
        assert (alice[1][1][1], bob[1][1][1]) == (0, 2)
        assert (alice[2][1][1], bob[2][1][1]) == (1, 2)

    def test_lexicographic_first(self):
        _, r = optimal_textbook_pair()
        t = statistics_from_realization(r)
        alice, bob = search_relabelings([t, t, t])
        assert alice[0] == ((1, 0), (1, 0)) and bob[0] == ((0, 1), (0, 1))

    def test_rejects_non_hardy_tables(self):
        t = ProbabilityTable(2, np.full((2, 2, 2, 2), 0.25))
        with pytest.raises(ValueError):
            search_relabelings([t, t, t])

    def test_no_relabeling_found(self, monkeypatch):
        import hardy_witness.witness as w

        _, r = optimal_textbook_pair()
        t = statistics_from_realization(r)
        # a success cell nothing can reach makes the search fail loudly
        monkeypatch.setattr(w, "FLAG_TARGETS", ((0, 1), (0, 2), (2, 2)))
        with pytest.raises(NoRelabelingFound):
            w.search_relabelings([t, t, t])


class TestSimulate:
    def test_equal_weights(self, equal_flag):
        r = hardy_evaluate(equal_flag[2])
        assert max(r.zero_residuals) <= 1e-9
        assert abs(r.success - P_HARDY_2) < 1e-9
        for term in r.success_terms:
            assert abs(term - P_HARDY_2 / 3) < 1e-9

    def test_skewed_weights_linear(self):
        spec, per_flag = default_flag_experiment((0.5, 0.3, 0.2))
        r = hardy_evaluate(simulate_flag_experiment(spec, per_flag))
        assert np.allclose(r.success_terms, np.array([0.5, 0.3, 0.2]) * P_HARDY_2, atol=1e-10)

    def test_degenerate_weights(self):
        spec, per_flag = default_flag_experiment((1.0, 0.0, 0.0))
        r = hardy_evaluate(simulate_flag_experiment(spec, per_flag))
        assert r.conditions_met and abs(r.success - P_HARDY_2) < 1e-9
        assert r.success_terms[1] == 0 and r.success_terms[2] == 0

    @given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda x: sum(x) > 0.1))
    @settings(max_examples=20, deadline=None)
    def test_convexity_saturation(self, raw):
        weights = tuple(np.array(raw) / sum(raw))
        spec, per_flag = default_flag_experiment(weights)
        t = simulate_flag_experiment(spec, per_flag)
        r = hardy_evaluate(t)
        per = [hardy_evaluate_textbook(statistics_from_realization(p)).success for p in per_flag]
        assert r.conditions_met
        assert r.success <= P_HARDY_2 + 1e-9
        assert not certify(t).rank_at_least_3
        assert abs(r.success - sum(w * s for w, s in zip(spec.weights, per))) < 1e-10

    def test_mismatched_state(self, equal_flag):
        spec, per_flag, _ = equal_flag
        bad = FlagStateSpec(spec.weights, (BELL, BELL, BELL), spec.alice_relabel, spec.bob_relabel)
        with pytest.raises(ValueError):
            simulate_flag_experiment(bad, per_flag)


class TestWeights:
    def test_fractions(self):
        assert parse_weights("1/3,1/3,1/3") == pytest.approx((1 / 3,) * 3)

    @pytest.mark.parametrize("text", ["1/2,1/2", "0.5,0.5,0.5", "a,b,c", "1/0,0,1", "-0.5,1,0.5"])
    def test_bad(self, text):
        with pytest.raises(ValueError):
            parse_weights(text)
