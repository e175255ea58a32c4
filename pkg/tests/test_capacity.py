import numpy as np
import pytest

import capacity
from capacity import (
    EnergyConstraint,
    ad_asymptotics,
    ad_ce,
    ad_ch,
    ad_sweep,
    bloch_grid_ce,
    ce_additivity_slack,
    ce_maximize,
    ce_maximize_constrained,
    ce_objective,
    concavity_slack,
    depolarizing_ce,
    depolarizing_chi,
    erasure_ce,
    holevo_chi,
    orthogonal_input_chi,
    pgm_error,
)
from channels import (
    Ensemble,
    ancilla_discarding,
    amplitude_damping,
    classical_embedding,
    dephasing,
    depolarizing,
    erasure,
    noiseless,
    superdense_ensemble,
    switched_3to2,
)
from config import IDENTITY_TOL
from errors import ConvergenceError, DimensionLimitError, InvalidParameterError, OptimizationCancelled
from qmath import (
    DensityOperator,
    PureState,
    QuantumChannel,
    binary_entropy,
    quantum_mutual_information,
    random_unitary,
)
from reverse_shannon import DMC, ba_capacity, bsc

TERNARY = DMC(matrix=[[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]])


class TestHolevoChi:
    def test_orthogonal_pure_states(self):
        ens = Ensemble(tuple((1 / 3, DensityOperator.basis(3, i)) for i in range(3)))
        assert holevo_chi(ens) == pytest.approx(np.log2(3))

    def test_identical_states(self, make_state):
        rho = make_state(2)
        assert holevo_chi(Ensemble(((0.5, rho), (0.5, rho)))) == pytest.approx(0.0, abs=1e-9)

    def test_non_orthogonal_pair(self):
        ens = Ensemble(((0.5, DensityOperator.basis(2, 0)), (0.5, DensityOperator.pure([1, 1]))))
        assert holevo_chi(ens) == pytest.approx(binary_entropy(np.cos(np.pi / 8) ** 2), abs=1e-10)

    @pytest.mark.parametrize(
        "ch, expected",
        [(noiseless(2), 1.0), (erasure(2, 0.5), 0.5), (depolarizing(2, 2 / 3), 0.0817), (dephasing(2), 1.0)],
    )
    def test_orthogonal_input_chi_table(self, ch, expected):
        assert orthogonal_input_chi(ch) == pytest.approx(expected, abs=1e-4)

    def test_superdense_ensemble_reaches_ce(self):
        assert holevo_chi(superdense_ensemble(noiseless(2))) == pytest.approx(2.0)
        assert holevo_chi(superdense_ensemble(depolarizing(2, 2 / 3))) == pytest.approx(0.2075, abs=1e-4)

    def test_superdense_ensemble_on_random_channels(self, make_channel):
        for _ in range(20):
            ch = make_channel(2, 2, 3)
            expected = quantum_mutual_information(ch, np.eye(2) / 2)
            assert holevo_chi(superdense_ensemble(ch)) == pytest.approx(expected, abs=1e-6)


class TestCeMaximize:
    @pytest.mark.parametrize(
        "ch, expected, tol",
        [
            (noiseless(2), 2.0, 1e-6),
            (erasure(2, 0.5), 1.0, 1e-5),
            (depolarizing(2, 2 / 3), 0.2075, 5e-4),
            (dephasing(2), 1.0, 1e-5),
            (classical_embedding(bsc(0.1)), 1 - binary_entropy(0.1), 1e-4),
        ],
    )
    def test_capacity_table(self, ch, expected, tol):
        result = ce_maximize(ch)
        assert result.value == pytest.approx(expected, abs=tol)
        assert result.gap_bound <= 1e-7

    def test_matches_closed_forms(self):
        assert ce_maximize(depolarizing(3, 0.4)).value == pytest.approx(depolarizing_ce(3, 0.4), abs=1e-6)
        assert ce_maximize(erasure(3, 0.25)).value == pytest.approx(erasure_ce(3, 0.25), abs=1e-6)

    def test_result_is_consistent(self):
        result = ce_maximize(amplitude_damping(0.3))
        assert ce_objective(amplitude_damping(0.3), result.argmax_rho) == pytest.approx(result.value, abs=1e-12)
        payload = result.to_json()
        assert set(payload) == {"value", "rho", "iterations", "gap_bound"}

    def test_amplitude_damping_agrees_with_diagonal_search(self):
        assert ce_maximize(amplitude_damping(0.5)).value == pytest.approx(ad_ce(0.5)[0], abs=1e-5)

    def test_callback_cancels(self):
        seen = []

        def stop(iteration, value, gap):
            seen.append((iteration, value, gap))
            return True

        with pytest.raises(OptimizationCancelled) as info:
            ce_maximize(noiseless(2), callback=stop)
        assert seen[0][0] == 0
        assert info.value.best.value == pytest.approx(2.0)

    def test_non_convergence_returns_best(self, monkeypatch):
        monkeypatch.setattr(capacity, "MAX_ITERS", 0)
        with pytest.raises(ConvergenceError) as info:
            ce_maximize(amplitude_damping(0.3), tol=1e-12)
        assert info.value.best is not None
        assert info.value.best.iterations == 0

    def test_invalid_tolerance(self):
        with pytest.raises(InvalidParameterError):
            ce_maximize(noiseless(2), tol=0.0)

    def test_ascent_is_monotone(self, make_channel):
        for ch in (amplitude_damping(0.3), make_channel(2, 2, 3), make_channel(3, 2, 4)):
            values = []
            ce_maximize(ch, callback=lambda iteration, value, gap: values.append(value))
            assert len(values) > 1
            assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_invariant_under_unitaries(self, make_channel, rng):
        for _ in range(3):
            ch = make_channel(2, 3, 3)
            u, v = random_unitary(2, rng), random_unitary(3, rng)
            rotated = QuantumChannel(tuple(v @ a @ u for a in ch.kraus))
            assert ce_maximize(rotated).value == pytest.approx(ce_maximize(ch).value, abs=1e-6)

    @pytest.mark.parametrize("anc_dim", [2, 3])
    def test_discarded_ancilla_does_not_help(self, anc_dim, make_channel):
        for ch in (amplitude_damping(0.3), make_channel(2, 2, 3)):
            reference = ce_maximize(ch).value
            extended = ce_maximize(ancilla_discarding(ch, anc_dim), tol=1e-6).value
            assert extended <= reference + 1e-5
            assert extended == pytest.approx(reference, abs=1e-5)

    def test_classical_channel_matches_blahut_arimoto(self):
        value, _ = ba_capacity(TERNARY)
        assert ce_maximize(classical_embedding(TERNARY)).value == pytest.approx(value, abs=1e-5)

    def test_dimension_limit(self):
        with pytest.raises(DimensionLimitError):
            ce_maximize(noiseless(17))

    @pytest.mark.slow
    def test_switched_channel(self):
        assert ce_maximize(switched_3to2(), tol=1e-4).value == pytest.approx(2.0, abs=1e-3)


class TestConstrained:
    def test_loose_bound_matches_unconstrained(self):
        constraint = EnergyConstraint(observable=np.diag([0.0, 1.0]), bound=1.0)
        result = ce_maximize_constrained(amplitude_damping(0.5), constraint)
        assert result.value == pytest.approx(1.0, abs=1e-5)

    def test_active_bound(self):
        constraint = EnergyConstraint(observable=np.diag([0.0, 1.0]), bound=0.3)
        result = ce_maximize_constrained(amplitude_damping(0.5), constraint)
        assert result.value == pytest.approx(binary_entropy(0.3), abs=1e-5)
        assert np.real(np.trace(np.diag([0.0, 1.0]) @ result.argmax_rho.mat)) <= 0.3 + 1e-9

    def test_bound_at_ground_energy(self):
        constraint = EnergyConstraint(observable=np.diag([0.0, 1.0]), bound=0.0)
        result = ce_maximize_constrained(amplitude_damping(0.5), constraint)
        assert result.value == pytest.approx(0.0, abs=1e-9)

    def test_infeasible_bound(self):
        constraint = EnergyConstraint(observable=np.diag([1.0, 2.0]), bound=0.5)
        with pytest.raises(InvalidParameterError):
            ce_maximize_constrained(noiseless(2), constraint)

    def test_invalid_tolerance(self):
        constraint = EnergyConstraint(observable=np.diag([0.0, 1.0]), bound=0.3)
        with pytest.raises(InvalidParameterError):
            ce_maximize_constrained(amplitude_damping(0.5), constraint, tol=0.0)

    def test_observable_must_be_hermitian(self):
        with pytest.raises(ValueError):
            EnergyConstraint(observable=np.array([[0.0, 1.0], [0.0, 0.0]]), bound=1.0)


class TestBlochGrid:
    def test_coarse_grid_matches_optimizer(self):
        ch = amplitude_damping(0.3)
        value, point = bloch_grid_ce(ch, resolution=0.05)
        assert np.linalg.norm(point) <= 1 + 1e-12
        assert value == pytest.approx(ce_maximize(ch).value, abs=1e-6)

    @pytest.mark.slow
    def test_fine_grid_depolarizing(self):
        value, _ = bloch_grid_ce(depolarizing(2, 2 / 3), resolution=0.01)
        assert value == pytest.approx(0.2075, abs=1e-4)

    @pytest.mark.slow
    def test_fine_grid_random_channels(self, make_channel):
        for _ in range(10):
            ch = make_channel(2, 2, 3)
            value, _ = bloch_grid_ce(ch, resolution=0.01)
            assert value == pytest.approx(ce_maximize(ch).value, abs=1e-4)

    def test_rejects_non_qubit(self):
        with pytest.raises(ValueError):
            bloch_grid_ce(noiseless(3))


class TestClosedForms:
    def test_table_values(self):
        assert depolarizing_ce(2, 2 / 3) == pytest.approx(0.2075, abs=1e-4)
        assert depolarizing_chi(2, 2 / 3) == pytest.approx(0.0817, abs=1e-4)
        assert erasure_ce(2, 0.5) == pytest.approx(1.0)
        assert depolarizing_ce(2, 0.0) == pytest.approx(2.0)


class TestAmplitudeDamping:
    def test_endpoints(self):
        value, x = ad_ce(0.0)
        assert value == pytest.approx(2.0, abs=1e-9)
        assert x == pytest.approx(0.5, abs=1e-5)
        assert ad_ce(1.0)[0] == pytest.approx(0.0, abs=1e-9)
        assert ad_ch(0.0)[0] == pytest.approx(1.0, abs=1e-9)
        assert ad_ch(1.0)[0] == pytest.approx(0.0, abs=1e-9)

    def test_half_damping(self):
        value, x = ad_ce(0.5)
        assert value == pytest.approx(1.0, abs=1e-9)
        assert x == pytest.approx(0.5, abs=1e-5)

    def test_ratio_increases_towards_full_damping(self):
        ratios = [ad_ce(p)[0] / ad_ch(p)[0] for p in (0.9, 0.99, 0.999, 0.9999)]
        assert all(a < b for a, b in zip(ratios, ratios[1:]))
        assert 2 < ratios[-1] < 4

    def test_asymptotics(self):
        ce_lead, _ = ad_asymptotics(0.999, 1 - 1e-9)
        _, ch_lead = ad_asymptotics(0.999, 0.5)
        assert ce_lead / ch_lead == pytest.approx(4.0, rel=1e-6)
        assert ad_asymptotics(0.999, 0.9)[0] / ad_ce(0.999)[0] == pytest.approx(1.0, abs=0.2)
        assert ad_asymptotics(0.99, 0.2)[1] == pytest.approx(ad_asymptotics(0.99, 0.8)[1])
        with pytest.raises(InvalidParameterError):
            ad_asymptotics(1.0, 0.5)

    def test_sweep_table(self):
        frame = ad_sweep([0.0, 0.5, 0.9])
        assert list(frame.columns) == ["p", "ce", "ch", "ratio", "x_ce", "x_ch"]
        assert frame.loc[0, ["ce", "ch", "ratio"]].tolist() == pytest.approx([2.0, 1.0, 2.0], abs=1e-6)


class TestPrettyGoodMeasurement:
    def test_orthonormal_codewords(self):
        words = [PureState(np.eye(4)[i], (4,)) for i in range(3)]
        exact, bound = pgm_error(words, np.eye(4))
        assert exact == pytest.approx([0.0] * 3, abs=1e-12)
        assert bound == pytest.approx([0.0] * 3, abs=1e-12)

    def test_single_codeword(self):
        exact, _ = pgm_error([PureState(np.array([0.6, 0.8]), (2,))], np.eye(2))
        assert exact == pytest.approx([0.0], abs=1e-12)

    def test_exact_error_below_bound(self, rng):
        for _ in range(50):
            vecs = random_unitary(8, rng)[:, :3]
            words = [PureState(vecs[:, i], (8,)) for i in range(3)]
            basis = random_unitary(8, rng)[:, :5]
            exact, bound = pgm_error(words, basis @ basis.conj().T)
            assert all(e <= b + 1e-9 for e, b in zip(exact, bound))

    def test_rejects_non_projector(self):
        with pytest.raises(InvalidParameterError):
            pgm_error([PureState(np.array([1.0, 0.0]), (2,))], np.diag([1.0, 0.5]))


class TestStructuralChecks:
    @pytest.mark.parametrize(
        "ch1, ch2, limit",
        [
            (depolarizing(2, 0.4), noiseless(2), 2e-7),
            (depolarizing(2, 2 / 3), depolarizing(2, 0.3), 1e-3),
            (dephasing(2), dephasing(2), 1e-4),
        ],
    )
    def test_additivity(self, ch1, ch2, limit):
        assert ce_additivity_slack(ch1, ch2) <= limit

    def test_additivity_dimension_limit(self):
        with pytest.raises(DimensionLimitError):
            ce_additivity_slack(noiseless(4), noiseless(5))

    def test_concavity(self, make_channel, make_state):
        for _ in range(500):
            ch = make_channel(2, 2, 3)
            slack = concavity_slack(ch, make_state(2), make_state(2), 0.3)
            assert slack >= -IDENTITY_TOL

    def test_concavity_trivial_cases(self, make_channel, make_state):
        ch = make_channel(2, 2, 2)
        rho0, rho1 = make_state(2), make_state(2)
        assert concavity_slack(ch, rho0, rho0, 0.4) == pytest.approx(0.0, abs=1e-9)
        assert concavity_slack(ch, rho0, rho1, 0.0) == pytest.approx(0.0, abs=1e-9)
        assert concavity_slack(ch, rho0, rho1, 1.0) == pytest.approx(0.0, abs=1e-9)
