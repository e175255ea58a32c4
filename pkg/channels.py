"""
Constructeurs des canaux : Pauli généralisés, canaux du tableau des
capacités, canal commuté 3 -> 2 qubits, plongement des canaux classiques
et ensemble de codage superdense.
"""
import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from config import STATE_TOL
from errors import DimensionMismatchError, InvalidParameterError
from qmath import (
    DensityOperator,
    PureState,
    QuantumChannel,
    apply_channel,
    as_density,
    extend_channel,
    matrix_from_json,
    matrix_to_json,
)
from reverse_shannon import DMC, bsc

logger = logging.getLogger(__name__)


def _check_prob(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"{name} doit être dans [0, 1] (reçu: {value})")
    return float(value)


def _check_dim(d: int) -> int:
    if int(d) != d or d < 2:
        raise InvalidParameterError(f"La dimension doit être un entier >= 2 (reçu: {d})")
    return int(d)


def _ket(d: int, i: int) -> np.ndarray:
    vec = np.zeros((d, 1), dtype=complex)
    vec[i, 0] = 1
    return vec


# ---------------------------------------------------------------------------
# Opérateurs de Pauli généralisés U_{j,k} = T^j R^k
# ---------------------------------------------------------------------------

def generalized_pauli(d: int, j: int, k: int) -> np.ndarray:
    d = _check_dim(d)
    if not (0 <= j < d and 0 <= k < d):
        raise InvalidParameterError(f"Indices (j, k) = ({j}, {k}) hors de [0, {d})")
    # T_{a,b} = delta_{a, b-1 mod d} ; R_{a,b} = exp(2 i pi a / d) delta_{a,b}
    shift = np.roll(np.eye(d, dtype=complex), -1, axis=0)
    phase = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return np.linalg.matrix_power(shift, j) @ np.linalg.matrix_power(phase, k)


# ---------------------------------------------------------------------------
# Canaux
# ---------------------------------------------------------------------------

def noiseless(d: int) -> QuantumChannel:
    return QuantumChannel((np.eye(_check_dim(d), dtype=complex),))


def depolarizing(d: int, q: float) -> QuantumChannel:
    """rho -> (1-q) rho + q I/d, réalisé avec les Pauli généralisés."""
    d, q = _check_dim(d), _check_prob("q", q)
    kraus = [np.sqrt(1 - q + q / d**2) * np.eye(d, dtype=complex)]
    kraus += [
        np.sqrt(q / d**2) * generalized_pauli(d, j, k)
        for j in range(d)
        for k in range(d)
        if (j, k) != (0, 0)
    ]
    return QuantumChannel(tuple(kraus))


def erasure(d: int, p: float) -> QuantumChannel:
    """Sortie de dimension d+1 ; |d><d| signale l'effacement."""
    d, p = _check_dim(d), _check_prob("p", p)
    embed = np.vstack([np.eye(d, dtype=complex), np.zeros((1, d), dtype=complex)])
    flag = _ket(d + 1, d)
    kraus = [np.sqrt(1 - p) * embed]
    kraus += [np.sqrt(p) * flag @ _ket(d, i).T for i in range(d)]
    return QuantumChannel(tuple(kraus))


def dephasing(d: int, fully: bool = True, strength: float = 1.0) -> QuantumChannel:
    """
    Déphasage dans la base booléenne.

    Avec `fully` (défaut) les termes hors diagonale sont annulés ; sinon
    rho -> (1-s) rho + s diag(rho) avec s = `strength`.
    """
    d = _check_dim(d)
    projectors = [_ket(d, i) @ _ket(d, i).T for i in range(d)]
    if fully:
        return QuantumChannel(tuple(projectors))
    s = _check_prob("strength", strength)
    kraus = [np.sqrt(1 - s) * np.eye(d, dtype=complex)] + [np.sqrt(s) * p for p in projectors]
    return QuantumChannel(tuple(kraus))


def amplitude_damping(p: float) -> QuantumChannel:
    p = _check_prob("p", p)
    a1 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
    a2 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    return QuantumChannel((a1, a2))


def switched_3to2() -> QuantumChannel:
    """
    Canal 3 qubits -> 2 qubits commandé par le premier qubit.

    Le premier qubit est mesuré dans la base {|0>, |1>}.
    - |0> : les qubits 2 et 3 sont déphasés et transmis comme deux bits,
      K_ab = |ab><0ab| (4 opérateurs).
    - |1> : le qubit 2 est transmis intact dans la première sortie, le
      qubit 3 est jeté et la seconde sortie reçoit I/2,
      K_ce = (I (x) |e>)(<1| (x) I (x) <c|) / sqrt(2) (4 opérateurs).
    """
    kraus = []
    for a in range(2):
        for b in range(2):
            out = _ket(4, 2 * a + b)
            inp = _ket(8, 2 * a + b)  # premier qubit à 0
            kraus.append(out @ inp.T)
    eye2 = np.eye(2, dtype=complex)
    bra1 = _ket(2, 1).T
    for c in range(2):
        discard = np.kron(np.kron(bra1, eye2), _ket(2, c).T)  # 2 x 8
        for e in range(2):
            replace = np.kron(eye2, _ket(2, e))  # 4 x 2
            kraus.append(replace @ discard / np.sqrt(2))
    return QuantumChannel(tuple(kraus))


def classical_embedding(dmc: DMC) -> QuantumChannel:
    """Kraus {sqrt(N_yx) |y><x|} : déphasage complet aux deux extrémités."""
    matrix = dmc.array
    kraus = [
        np.sqrt(matrix[x, y]) * _ket(dmc.d_out, y) @ _ket(dmc.d_in, x).T
        for x in range(dmc.d_in)
        for y in range(dmc.d_out)
        if matrix[x, y] > 0
    ]
    return QuantumChannel(tuple(kraus))


def ancilla_discarding(ch: QuantumChannel, anc_dim: int) -> QuantumChannel:
    """N' = N o tr_anc sur H_in (x) H_anc (Kraus A_k (x) <e|)."""
    if anc_dim < 1:
        raise InvalidParameterError(f"Dimension d'ancilla invalide: {anc_dim}")
    return QuantumChannel(
        tuple(np.kron(a, _ket(anc_dim, e).T) for a in ch.kraus for e in range(anc_dim))
    )


def maximally_entangled(d: int) -> PureState:
    d = _check_dim(d)
    vec = np.eye(d, dtype=complex).ravel() / np.sqrt(d)
    return PureState(vec, (d, d))


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Ensemble:
    """Liste de (probabilité, état) de même dimension."""

    items: tuple

    def __post_init__(self):
        items = tuple((float(p), as_density(rho)) for p, rho in self.items)
        if not items:
            raise InvalidParameterError("Ensemble vide")
        dims = {rho.dim for _, rho in items}
        if len(dims) != 1:
            raise DimensionMismatchError(f"États de dimensions différentes: {sorted(dims)}")
        probs = np.array([p for p, _ in items])
        if np.any(probs < 0) or abs(probs.sum() - 1) > STATE_TOL:
            raise InvalidParameterError(f"Probabilités invalides (somme {probs.sum():.12f})")
        object.__setattr__(self, "items", items)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for p, _ in self.items])

    @property
    def dim(self) -> int:
        return self.items[0][1].dim

    def average(self) -> DensityOperator:
        return DensityOperator(sum(p * rho.mat for p, rho in self.items))


def superdense_ensemble(ch: QuantumChannel) -> Ensemble:
    """
    États (N (x) I)(U_jk (x) I) phi (U_jk (x) I)^dag, chacun de poids 1/d^2.
    """
    d = ch.d_in
    phi = maximally_entangled(d).vec
    extended = extend_channel(ch, d)
    eye = np.eye(d)
    items = []
    for j in range(d):
        for k in range(d):
            vec = np.kron(generalized_pauli(d, j, k), eye) @ phi
            items.append((1 / d**2, apply_channel(extended, np.outer(vec, vec.conj()))))
    return Ensemble(tuple(items))


# ---------------------------------------------------------------------------
# Spécification JSON des canaux
# ---------------------------------------------------------------------------

ChannelKind = Literal[
    "noiseless",
    "depolarizing",
    "erasure",
    "dephasing",
    "amplitude_damping",
    "switched_3to2",
    "classical_embedding",
    "explicit_kraus",
]

# nom de preset -> (kind, noms des paramètres positionnels)
PRESETS = {
    "noiseless": ("noiseless", ["d"]),
    "depolarizing": ("depolarizing", ["d", "q"]),
    "erasure": ("erasure", ["d", "p"]),
    "dephasing": ("dephasing", ["d"]),
    "amplitude-damping": ("amplitude_damping", ["p"]),
    "switched-3to2": ("switched_3to2", []),
    "bsc": ("classical_embedding", ["p"]),
}


class ChannelSpec(BaseModel):
    """Document {"kind": ..., "params": {...}, "kraus": [...] optionnel}."""

    kind: ChannelKind
    params: dict[str, float] = Field(default_factory=dict)
    kraus: Optional[list] = None
    matrix: Optional[list[list[float]]] = None

    @field_validator("params")
    @classmethod
    def check_params(cls, params: dict[str, float]) -> dict[str, float]:
        for name in ("p", "q", "strength"):
            if name in params and not 0.0 <= params[name] <= 1.0:
                raise ValueError(f"{name} doit être dans [0, 1] (reçu: {params[name]})")
        if "d" in params and (params["d"] < 2 or params["d"] != int(params["d"])):
            raise ValueError(f"d doit être un entier >= 2 (reçu: {params['d']})")
        return params

    @model_validator(mode="after")
    def check_payload(self) -> "ChannelSpec":
        if self.kind == "explicit_kraus" and not self.kraus:
            raise ValueError("Le type explicit_kraus exige la liste 'kraus'")
        if self.kind == "classical_embedding" and self.matrix is None and "p" not in self.params:
            raise ValueError("classical_embedding exige 'matrix' ou le paramètre 'p' (BSC)")
        return self

    @classmethod
    def from_preset(cls, text: str) -> "ChannelSpec":
        """Ex. 'amplitude-damping:0.5', 'depolarizing:2,0.6667', 'switched-3to2'."""
        name, _, raw = text.partition(":")
        if name not in PRESETS:
            raise ValueError(f"Preset inconnu: {name}. Valeurs acceptées: {sorted(PRESETS)}")
        kind, names = PRESETS[name]
        values = [float(v) for v in raw.split(",") if v.strip()] if raw else []
        if len(values) != len(names):
            raise ValueError(f"Le preset {name} attend {len(names)} paramètre(s) {names}, reçu {values}")
        return cls(kind=kind, params=dict(zip(names, values)))

    def build(self) -> QuantumChannel:
        params = self.params
        d = int(params.get("d", 2))
        if self.kind == "noiseless":
            return noiseless(d)
        if self.kind == "depolarizing":
            return depolarizing(d, params["q"])
        if self.kind == "erasure":
            return erasure(d, params["p"])
        if self.kind == "dephasing":
            strength = params.get("strength", 1.0)
            return dephasing(d, fully=strength == 1.0, strength=strength)
        if self.kind == "amplitude_damping":
            return amplitude_damping(params["p"])
        if self.kind == "switched_3to2":
            return switched_3to2()
        if self.kind == "classical_embedding":
            dmc = DMC(matrix=self.matrix) if self.matrix is not None else bsc(params["p"])
            return classical_embedding(dmc)
        return QuantumChannel(tuple(matrix_from_json(a) for a in self.kraus))

    @classmethod
    def from_channel(cls, ch: QuantumChannel) -> "ChannelSpec":
        return cls(kind="explicit_kraus", kraus=[matrix_to_json(a) for a in ch.kraus])
