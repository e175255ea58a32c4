from itertools import product
from math import comb

import numpy as np
import pytest
from scipy.stats import chisquare

from errors import CombinatorialLimitError, InvalidParameterError
from typeclasses import (
    JointType,
    TypeClass,
    count_types,
    enumerate_types,
    joint_type,
    jtc_probability,
    sample_from_type,
    type_from_index,
    type_index,
    type_of,
    typical_eigenstate_set,
    typical_subspace_report,
)


class TestTypes:
    def test_type_of(self):
        assert type_of("0011", 2).counts == (2, 2)
        assert type_of("", 3).counts == (0, 0, 0)
        assert type_of([2, 0, 2], 3).counts == (1, 0, 2)
        with pytest.raises(InvalidParameterError):
            type_of("012", 2)

    def test_type_is_permutation_invariant(self, rng):
        x = rng.integers(3, size=12)
        for _ in range(20):
            assert type_of(rng.permutation(x), 3) == type_of(x, 3)

    def test_type_validation(self):
        with pytest.raises(ValueError):
            TypeClass(counts=(1, 2), n=4)
        with pytest.raises(ValueError):
            TypeClass(counts=(-1, 3), n=2)

    def test_type_size(self):
        assert TypeClass(counts=(2, 2), n=4).size() == 6
        assert TypeClass(counts=(1, 1, 2), n=4).size() == 12


class TestJointTypes:
    def test_identical_strings(self):
        jt = joint_type("01", "01", 2, 2)
        assert jt.counts == ((1, 0), (0, 1))

    def test_hamming_distance(self, rng):
        x, y = rng.integers(2, size=15), rng.integers(2, size=15)
        jt = joint_type(x, y, 2, 2)
        assert jt.counts[0][1] + jt.counts[1][0] == int(np.sum(x != y))

    def test_marginals(self):
        jt = joint_type("0120", "1102", 3, 3)
        assert jt.input_type().counts == (2, 1, 1)
        assert jt.output_type().counts == (1, 2, 1)

    def test_permutation_invariant(self, rng):
        x, y = rng.integers(2, size=10), rng.integers(3, size=10)
        for _ in range(20):
            perm = rng.permutation(10)
            assert joint_type(x[perm], y[perm], 2, 3) == joint_type(x, y, 2, 3)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            joint_type("01", "011")

    def test_transition_probability(self):
        matrix = np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]])
        for xs in product(range(2), repeat=3):
            for ys in product(range(3), repeat=3):
                direct = np.prod(matrix[list(xs), list(ys)])
                assert jtc_probability(matrix, joint_type(xs, ys, 2, 3)) == pytest.approx(direct, abs=1e-15)

    def test_transition_probability_zero_entry(self):
        jt = JointType(counts=((1, 1), (0, 0)), n=2)
        assert jtc_probability(np.array([[1.0, 0.0], [0.0, 1.0]]), jt) == 0.0


class TestEnumeration:
    def test_small_cases(self):
        assert [tc.counts for tc in enumerate_types(2, 2)] == [(2, 0), (1, 1), (0, 2)]
        assert len(enumerate_types(4, 2)) == 5

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_stars_and_bars(self, d):
        for n in range(0, 21):
            assert len(enumerate_types(n, d)) == comb(n + d - 1, d - 1) == count_types(n, d)

    def test_index_round_trip(self):
        for i, tc in enumerate(enumerate_types(6, 3)):
            assert type_index(tc) == i
            assert type_from_index(6, 3, i) == tc
        with pytest.raises(InvalidParameterError):
            type_from_index(6, 3, count_types(6, 3))

    def test_count_limit(self):
        with pytest.raises(CombinatorialLimitError):
            count_types(1000, 10)


class TestSampling:
    def test_degenerate_type(self, rng):
        assert sample_from_type(TypeClass(counts=(5, 0), n=5), rng) == (0, 0, 0, 0, 0)

    def test_sample_has_requested_type(self, rng):
        tc = TypeClass(counts=(3, 1, 2), n=6)
        for _ in range(100):
            assert type_of(sample_from_type(tc, rng), 3) == tc

    def test_uniform_over_type(self, rng):
        tc = TypeClass(counts=(2, 2), n=4)
        draws = [sample_from_type(tc, rng) for _ in range(100_000)]
        strings = sorted(set(draws))
        assert len(strings) == 6
        observed = np.array([draws.count(s) for s in strings])
        assert chisquare(observed).pvalue > 1e-3


class TestTypicalSet:
    def test_large_delta_keeps_everything(self):
        typical = typical_eigenstate_set([0.7, 0.3], 6, 1.0)
        assert len(typical) == 2**6

    def test_single_letter(self):
        typical = typical_eigenstate_set([0.5, 0.5], 1, 0.6)
        assert (0,) in typical and (1,) in typical
        assert (0,) not in typical_eigenstate_set([0.5, 0.5], 1, 0.4)

    @pytest.mark.parametrize("eigs", [[0.7, 0.3], [0.5, 0.3, 0.2]])
    @pytest.mark.parametrize("n", [1, 4, 7])
    @pytest.mark.parametrize("delta", [0.05, 0.1, 0.25])
    def test_cardinality_brute_force(self, eigs, n, delta):
        typical = typical_eigenstate_set(eigs, n, delta)
        d = len(eigs)
        members = [s for s in product(range(d), repeat=n) if s in typical]
        assert len(typical) == len(members)
        assert sorted(typical) == members

    def test_exact_boundary_is_excluded(self):
        # |N_0 - 0.7 * 10| = 1 = delta * n : hors de l'ensemble
        typical = typical_eigenstate_set([0.7, 0.3], 10, 0.1)
        assert "0000000011" not in typical
        assert "0000000111" in typical

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameterError):
            typical_eigenstate_set([0.7, 0.2], 4, 0.1)
        with pytest.raises(InvalidParameterError):
            typical_eigenstate_set([0.7, 0.3], 4, 0.0)


class TestTypicalSubspaceReport:
    def test_biased_qubit_small_n(self):
        report = typical_subspace_report(np.diag([0.7, 0.3]), 20, 0.1)
        assert report.trace_mass == pytest.approx(0.5348, abs=1e-4)
        assert report.dim == comb(20, 13) + comb(20, 14) + comb(20, 15)
        assert report.bounds_ok == (False, True, True)

    def test_biased_qubit_large_n(self):
        report = typical_subspace_report(np.diag([0.7, 0.3]), 100, 0.1)
        assert report.bounds_ok == (True, True, True)
        assert not report.unstable_constant

    def test_maximally_mixed_mass_grows(self):
        masses = [typical_subspace_report(np.eye(2) / 2, n, 0.1).trace_mass for n in (10, 40, 160)]
        assert masses[0] < masses[1] < masses[2]
        report = typical_subspace_report(np.eye(2) / 2, 160, 0.1)
        assert report.bounds_ok[2]

    def test_pure_state(self):
        report = typical_subspace_report(np.diag([1.0, 0.0]), 30, 0.05)
        assert report.trace_mass == pytest.approx(1.0)
        assert report.dim == 1
        assert report.entropy == pytest.approx(0.0)
        assert report.support_dim == 1
        assert report.bounds_ok == (True, True, True)

    def test_tiny_eigenvalue_flagged(self):
        report = typical_subspace_report(np.diag([1 - 1e-8, 1e-8]), 10, 0.1)
        assert report.unstable_constant
