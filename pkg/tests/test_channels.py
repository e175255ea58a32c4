import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from channels import (
    ChannelSpec,
    Ensemble,
    amplitude_damping,
    ancilla_discarding,
    classical_embedding,
    dephasing,
    depolarizing,
    erasure,
    generalized_pauli,
    maximally_entangled,
    noiseless,
    superdense_ensemble,
    switched_3to2,
)
from errors import DimensionMismatchError, InvalidParameterError
from qmath import DensityOperator, apply_channel, von_neumann_entropy
from reverse_shannon import DMC, bsc

SAMPLES = Path(__file__).resolve().parent.parent / "exemple_channels.json"


@pytest.mark.parametrize("d", [2, 3, 4])
def test_generalized_paulis_are_orthogonal_unitaries(d):
    ops = [generalized_pauli(d, j, k) for j in range(d) for k in range(d)]
    for u in ops:
        assert np.allclose(u @ u.conj().T, np.eye(d))
    gram = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
    assert np.allclose(gram, d * np.eye(d * d))


def test_generalized_pauli_rejects_bad_index():
    with pytest.raises(InvalidParameterError):
        generalized_pauli(2, 2, 0)


@pytest.mark.parametrize(
    "ch",
    [
        noiseless(3),
        depolarizing(3, 0.4),
        erasure(2, 0.3),
        dephasing(3),
        dephasing(2, fully=False, strength=0.25),
        amplitude_damping(0.7),
        switched_3to2(),
    ],
)
def test_channels_are_trace_preserving(ch):
    total = sum(a.conj().T @ a for a in ch.kraus)
    assert np.allclose(total, np.eye(ch.d_in), atol=1e-12)


def test_depolarizing_action():
    rho = DensityOperator.pure([0.6, 0.8])
    out = apply_channel(depolarizing(2, 0.3), rho)
    assert np.allclose(out.mat, 0.7 * rho.mat + 0.3 * np.eye(2) / 2)


def test_erasure_flags_erased_symbol():
    out = apply_channel(erasure(2, 1.0), np.eye(2) / 2)
    assert out.dim == 3
    assert out.mat[2, 2].real == pytest.approx(1.0)


def test_partial_dephasing_shrinks_coherences():
    plus = DensityOperator.pure([1, 1])
    out = apply_channel(dephasing(2, fully=False, strength=0.25), plus)
    assert out.mat[0, 1].real == pytest.approx(0.375)


def test_switched_channel_branches():
    ch = switched_3to2()
    assert (ch.d_in, ch.d_out, ch.n_kraus) == (8, 4, 8)
    # premier qubit à 0 : les deux bits passent
    out = apply_channel(ch, DensityOperator.basis(8, 0b011))
    assert out.mat[3, 3].real == pytest.approx(1.0)
    # premier qubit à 1 : qubit 2 intact, seconde sortie maximalement mélangée
    out = apply_channel(ch, DensityOperator.basis(8, 0b110))
    assert np.allclose(out.mat, np.kron(np.diag([0, 1]), np.eye(2) / 2))


def test_classical_embedding_matches_dmc():
    dmc = DMC(matrix=[[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]])
    ch = classical_embedding(dmc)
    out = apply_channel(ch, DensityOperator.basis(2, 1))
    assert np.allclose(np.diag(out.mat).real, [0.1, 0.3, 0.6])
    assert np.allclose(out.mat, np.diag(np.diag(out.mat)))


def test_ancilla_discarding_traces_out_ancilla():
    ch = ancilla_discarding(noiseless(2), 2)
    joint = DensityOperator.basis(2, 1).tensor(DensityOperator.pure([1, 1]))
    assert np.allclose(apply_channel(ch, joint).mat, np.diag([0, 1]))
    with pytest.raises(InvalidParameterError):
        ancilla_discarding(noiseless(2), 0)


def test_maximally_entangled_state():
    phi = maximally_entangled(3)
    assert phi.dims == (3, 3)
    assert np.linalg.norm(phi.vec) == pytest.approx(1.0)


def test_superdense_ensemble_noiseless():
    ens = superdense_ensemble(noiseless(2))
    assert ens.dim == 4
    assert np.allclose(ens.probabilities, 0.25)
    assert np.allclose(ens.average().mat, np.eye(4) / 4)
    for _, state in ens.items:
        assert von_neumann_entropy(state) == pytest.approx(0.0, abs=1e-9)


def test_ensemble_validation():
    with pytest.raises(InvalidParameterError):
        Ensemble(((0.4, np.eye(2) / 2), (0.4, np.eye(2) / 2)))
    with pytest.raises(DimensionMismatchError):
        Ensemble(((0.5, np.eye(2) / 2), (0.5, np.eye(3) / 3)))


@pytest.mark.parametrize(
    "name", ["erasure_50", "dephasing_qubit", "amplitude_damping_05", "bsc_01", "ternary_dmc", "hadamard_kraus"]
)
def test_sample_documents_build(name):
    documents = json.loads(SAMPLES.read_text(encoding="utf-8"))
    ch = ChannelSpec.model_validate(documents[name]).build()
    assert np.allclose(sum(a.conj().T @ a for a in ch.kraus), np.eye(ch.d_in), atol=1e-9)


def test_preset_parsing():
    spec = ChannelSpec.from_preset("depolarizing:2,0.6667")
    assert spec.kind == "depolarizing"
    assert spec.params == {"d": 2.0, "q": 0.6667}
    assert ChannelSpec.from_preset("switched-3to2").build().d_in == 8
    with pytest.raises(ValueError):
        ChannelSpec.from_preset("teleporter:1")
    with pytest.raises(ValueError):
        ChannelSpec.from_preset("erasure:2")


def test_spec_validation():
    with pytest.raises(ValidationError):
        ChannelSpec(kind="erasure", params={"d": 2, "p": 1.5})
    with pytest.raises(ValidationError):
        ChannelSpec(kind="explicit_kraus")


def test_spec_from_channel_round_trip():
    ch = amplitude_damping(0.3)
    rebuilt = ChannelSpec.model_validate_json(ChannelSpec.from_channel(ch).model_dump_json()).build()
    assert np.allclose(rebuilt.stack, ch.stack)


def test_bsc_preset_is_classical():
    ch = ChannelSpec.from_preset("bsc:0.1").build()
    expected = classical_embedding(bsc(0.1))
    assert np.allclose(ch.stack, expected.stack)
