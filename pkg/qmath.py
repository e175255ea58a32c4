"""
Algèbre linéaire complexe de dimension finie et primitives d'entropie.

Toutes les entropies sont en bits (log base 2). Les objets sont immuables
après construction : les tableaux numpy internes sont en lecture seule.
"""
import logging
from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

import numpy as np
from scipy.special import entr
from scipy.stats import unitary_group

from config import EIG_ZERO_TOL, KRAUS_TOL, STATE_TOL
from errors import DimensionMismatchError, InvalidChannelError, InvalidStateError

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


# ---------------------------------------------------------------------------
# Codec JSON des matrices complexes : tableaux imbriqués de paires [re, im]
# ---------------------------------------------------------------------------

def matrix_to_json(mat) -> list:
    mat = np.atleast_2d(np.asarray(mat, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise DimensionMismatchError(
            f"Matrice JSON attendue sous forme [[[re, im], ...], ...], forme reçue: {arr.shape}"
        )
    mat = arr[..., 0] + 1j * arr[..., 1]
    if not np.all(np.isfinite(mat)):
        raise InvalidStateError("La matrice contient des valeurs non finies")
    return mat


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


def _hermitize(mat: np.ndarray) -> np.ndarray:
    return (mat + mat.conj().T) / 2


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Matrice d x d hermitienne, positive, de trace 1."""

    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise InvalidStateError(f"Un état doit être une matrice carrée, forme reçue: {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise InvalidStateError("L'état contient des valeurs non finies")
        herm_err = np.max(np.abs(mat - mat.conj().T))
        if herm_err > STATE_TOL:
            raise InvalidStateError(f"État non hermitien (écart {herm_err:.3e})")
        mat = _hermitize(mat)
        trace_err = abs(np.trace(mat) - 1)
        if trace_err > STATE_TOL:
            raise InvalidStateError(f"Trace différente de 1 (écart {trace_err:.3e})")
        min_eig = np.linalg.eigvalsh(mat)[0]
        if min_eig < -STATE_TOL:
            raise InvalidStateError(f"État non positif (valeur propre minimale {min_eig:.3e})")
        object.__setattr__(self, "mat", _readonly(mat))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityOperator":
        return cls(np.eye(d) / d)

    @classmethod
    def pure(cls, vec) -> "DensityOperator":
        vec = np.asarray(vec, dtype=complex).ravel()
        vec = vec / np.linalg.norm(vec)
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def basis(cls, d: int, i: int) -> "DensityOperator":
        vec = np.zeros(d, dtype=complex)
        vec[i] = 1
        return cls.pure(vec)

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        return DensityOperator(np.kron(self.mat, other.mat))

    def to_json(self) -> list:
        return matrix_to_json(self.mat)


@dataclass(frozen=True, eq=False)
class PureState:
    """Vecteur unitaire, interprété comme un état multipartite via `dims`."""

    vec: np.ndarray
    dims: tuple

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=complex).ravel()
        dims = tuple(int(d) for d in self.dims)
        if prod(dims) != vec.size:
            raise DimensionMismatchError(
                f"Produit des dimensions {dims} différent de la longueur {vec.size}"
            )
        norm_err = abs(np.linalg.norm(vec) - 1)
        if norm_err > STATE_TOL:
            raise InvalidStateError(f"Vecteur non normalisé (écart {norm_err:.3e})")
        object.__setattr__(self, "vec", _readonly(vec))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.vec.size

    def density(self) -> DensityOperator:
        return DensityOperator(np.outer(self.vec, self.vec.conj()))


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Application CPTP donnée par une famille de Kraus {A_k} (d_out x d_in)."""

    kraus: tuple

    def __post_init__(self):
        if len(self.kraus) == 0:
            raise InvalidChannelError("Au moins un opérateur de Kraus est requis")
        mats = [np.atleast_2d(np.asarray(a, dtype=complex)) for a in self.kraus]
        shape = mats[0].shape
        if any(m.shape != shape for m in mats):
            raise DimensionMismatchError("Les opérateurs de Kraus n'ont pas tous la même forme")
        stack = np.stack(mats)
        completeness = np.einsum("kab,kac->bc", stack.conj(), stack)
        err = np.max(np.abs(completeness - np.eye(shape[1])))
        if err > KRAUS_TOL:
            raise InvalidChannelError(f"Famille de Kraus incomplète (écart {err:.3e})")
        stack.setflags(write=False)
        object.__setattr__(self, "kraus", tuple(_readonly(m) for m in mats))
        object.__setattr__(self, "_stack", stack)

    @property
    def d_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def n_kraus(self) -> int:
        return len(self.kraus)

    @property
    def stack(self) -> np.ndarray:
        """Tableau K x d_out x d_in des opérateurs de Kraus."""
        return self._stack

    def to_json(self) -> list:
        return [matrix_to_json(a) for a in self.kraus]


# ---------------------------------------------------------------------------
# Noyaux sur tableaux bruts (utilisés tels quels par l'optimiseur)
# ---------------------------------------------------------------------------

def entropy_of_matrix(mat: np.ndarray) -> float:
    eigs = np.linalg.eigvalsh(mat)
    eigs = np.where(eigs < EIG_ZERO_TOL, 0.0, eigs)
    return max(float(entr(eigs).sum() / LN2), 0.0)


def apply_kraus(stack: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.einsum("kab,bc,kdc->ad", stack, rho, stack.conj())


def environment_matrix(stack: np.ndarray, rho: np.ndarray) -> np.ndarray:
    # E(rho)_kl = tr(A_k rho A_l^dag)
    return np.einsum("kab,bc,lac->kl", stack, rho, stack.conj())


def adjoint_kraus(stack: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.einsum("kab,ac,kcd->bd", stack.conj(), x, stack)


def environment_adjoint(stack: np.ndarray, x: np.ndarray) -> np.ndarray:
    # E^dag(X) = sum_kl X_lk A_l^dag A_k
    return np.einsum("lk,lac,kab->cb", x, stack.conj(), stack)


def log2_matrix(mat: np.ndarray) -> np.ndarray:
    """log2 d'une matrice hermitienne, valeurs propres bornées à EIG_ZERO_TOL."""
    eigs, vecs = np.linalg.eigh(mat)
    logs = np.log2(np.maximum(eigs, EIG_ZERO_TOL))
    return (vecs * logs) @ vecs.conj().T


# ---------------------------------------------------------------------------
# Opérations
# ---------------------------------------------------------------------------

def as_density(rho) -> DensityOperator:
    if isinstance(rho, DensityOperator):
        return rho
    if isinstance(rho, PureState):
        return rho.density()
    return DensityOperator(rho)


def _check_input(ch: QuantumChannel, rho: DensityOperator) -> None:
    if rho.dim != ch.d_in:
        raise DimensionMismatchError(
            f"Dimension d'entrée {ch.d_in} attendue, état de dimension {rho.dim}"
        )


def binary_entropy(p: float) -> float:
    p = float(np.clip(p, 0.0, 1.0))
    return float((entr(p) + entr(1 - p)) / LN2)


def von_neumann_entropy(rho) -> float:
    """H(rho) = -tr(rho log2 rho), en bits."""
    rho = as_density(rho)
    return min(entropy_of_matrix(rho.mat), np.log2(rho.dim))


def apply_channel(ch: QuantumChannel, rho) -> DensityOperator:
    rho = as_density(rho)
    _check_input(ch, rho)
    return DensityOperator(_hermitize(apply_kraus(ch.stack, rho.mat)))


def adjoint_apply(ch: QuantumChannel, x) -> np.ndarray:
    """N^dag(X) = sum_k A_k^dag X A_k (image de Heisenberg)."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (ch.d_out, ch.d_out):
        raise DimensionMismatchError(f"Observable {ch.d_out}x{ch.d_out} attendue, forme {x.shape}")
    return adjoint_kraus(ch.stack, x)


def complementary_apply(ch: QuantumChannel, rho) -> DensityOperator:
    """État de l'environnement, E(rho)_kl = tr(A_k rho A_l^dag)."""
    rho = as_density(rho)
    _check_input(ch, rho)
    return DensityOperator(_hermitize(environment_matrix(ch.stack, rho.mat)))


def complementary_adjoint(ch: QuantumChannel, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (ch.n_kraus, ch.n_kraus):
        raise DimensionMismatchError(
            f"Observable {ch.n_kraus}x{ch.n_kraus} attendue, forme {x.shape}"
        )
    return environment_adjoint(ch.stack, x)


def entropy_exchange(ch: QuantumChannel, rho) -> float:
    return von_neumann_entropy(complementary_apply(ch, rho))


def _phase_fixed(vec: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(vec) > 1e-9))
    phase = vec[idx] / abs(vec[idx]) if abs(vec[idx]) > 0 else 1.0
    return vec / phase


def canonical_eigh(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Décomposition spectrale triée par valeurs propres décroissantes.

    Les vecteurs propres ont leur première composante non nulle réelle
    positive ; à valeur propre égale on prend l'ordre lexicographique.
    """
    eigs, vecs = np.linalg.eigh(mat)
    vecs = np.column_stack([_phase_fixed(vecs[:, i]) for i in range(len(eigs))])

    def key(i):
        v = vecs[:, i]
        return (-round(float(eigs[i]), 12),) + tuple(
            c for z in v for c in (round(float(z.real), 12), round(float(z.imag), 12))
        )

    order = sorted(range(len(eigs)), key=key)
    return eigs[order], vecs[:, order]


def purify(rho) -> PureState:
    """Purification canonique sum_i sqrt(lambda_i) |v_i> (x) |i>."""
    rho = as_density(rho)
    eigs, vecs = canonical_eigh(rho.mat)
    amplitudes = vecs * np.sqrt(np.clip(eigs, 0.0, None))
    vec = amplitudes.ravel()
    return PureState(vec / np.linalg.norm(vec), (rho.dim, rho.dim))


def partial_trace(state, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace partielle ; les facteurs conservés gardent leur ordre croissant."""
    if isinstance(state, PureState):
        mat = np.outer(state.vec, state.vec.conj())
    elif isinstance(state, DensityOperator):
        mat = state.mat
    else:
        mat = np.asarray(state, dtype=complex)
        if mat.ndim == 1:
            mat = np.outer(mat, mat.conj())
    dims = [int(d) for d in dims]
    keep = sorted(set(int(k) for k in keep))
    if any(d < 1 for d in dims) or prod(dims) != mat.shape[0] or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatchError(f"Dimensions {dims} incompatibles avec une matrice {mat.shape}")
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatchError(f"Indices conservés {keep} hors de [0, {len(dims)})")

    n = len(dims)
    tensor = mat.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    for count, axis in enumerate(sorted(traced, reverse=True)):
        tensor = np.trace(tensor, axis1=axis, axis2=axis + n - count)
    d_keep = prod(dims[k] for k in keep)
    return tensor.reshape(d_keep, d_keep)


def extend_channel(ch: QuantumChannel, ref_dim: int) -> QuantumChannel:
    """N (x) I_ref, la référence étant le second facteur."""
    eye = np.eye(ref_dim)
    return QuantumChannel(tuple(np.kron(a, eye) for a in ch.kraus))


def tensor_channels(ch1: QuantumChannel, ch2: QuantumChannel) -> QuantumChannel:
    return QuantumChannel(tuple(np.kron(a, b) for a in ch1.kraus for b in ch2.kraus))


def entropy_exchange_via_purification(ch: QuantumChannel, rho, reference_unitary=None) -> float:
    """
    Deuxième voie : H((N (x) I)(Phi_rho)).

    `reference_unitary` tourne d'abord le facteur de référence ; le résultat
    ne dépend pas de la purification choisie.
    """
    rho = as_density(rho)
    _check_input(ch, rho)
    phi = purify(rho)
    vec = phi.vec
    if reference_unitary is not None:
        u = np.asarray(reference_unitary, dtype=complex)
        vec = np.kron(np.eye(rho.dim), u) @ vec
    joint = apply_channel(extend_channel(ch, rho.dim), np.outer(vec, vec.conj()))
    return von_neumann_entropy(joint)


def quantum_mutual_information(ch: QuantumChannel, rho) -> float:
    """H(rho) + H(N(rho)) - H(E(rho))."""
    rho = as_density(rho)
    _check_input(ch, rho)
    return (
        entropy_of_matrix(rho.mat)
        + entropy_of_matrix(apply_kraus(ch.stack, rho.mat))
        - entropy_of_matrix(environment_matrix(ch.stack, rho.mat))
    )


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    eigs, vecs = np.linalg.eigh(mat)
    return (vecs * np.sqrt(np.clip(eigs, 0.0, None))) @ vecs.conj().T


def fidelity(rho, sigma) -> float:
    """F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho, sigma = as_density(rho), as_density(sigma)
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"Dimensions différentes: {rho.dim} et {sigma.dim}")
    root = _sqrtm_psd(rho.mat)
    inner = np.linalg.eigvalsh(_hermitize(root @ sigma.mat @ root))
    value = float(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2)
    return float(np.clip(value, 0.0, 1.0))


def ssa_slack(rho_abc, dims: Sequence[int]) -> float:
    """H(AB) + H(AC) - H(ABC) - H(A), positif par sous-additivité forte."""
    rho_abc = as_density(rho_abc)
    if len(dims) != 3:
        raise DimensionMismatchError(f"Trois facteurs attendus, reçu {list(dims)}")
    h = lambda keep: entropy_of_matrix(partial_trace(rho_abc, dims, keep))  # noqa: E731
    return h([0, 1]) + h([0, 2]) - entropy_of_matrix(rho_abc.mat) - h([0])


def chain_rule_gap(probs: Sequence[float], states: Sequence) -> float:
    """
    H(rho_XC) - H(p) - sum_j p_j H(rho_j) pour rho_XC = sum_j p_j rho_j (x) |j><j|.
    """
    states = [as_density(s) for s in states]
    probs = np.asarray(probs, dtype=float)
    k = len(states)
    joint = sum(p * np.kron(s.mat, np.diag(np.eye(k)[j])) for j, (p, s) in enumerate(zip(probs, states)))
    h_p = float(entr(probs).sum() / LN2)
    return entropy_of_matrix(joint) - h_p - sum(p * von_neumann_entropy(s) for p, s in zip(probs, states))


# ---------------------------------------------------------------------------
# Tirages aléatoires (balayages de propriétés)
# ---------------------------------------------------------------------------

def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(d, random_state=rng)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Mesure de Ginibre (rang plein par défaut)."""
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    mat = g @ g.conj().T
    return DensityOperator(mat / np.trace(mat).real)


def random_channel(d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator) -> QuantumChannel:
    """Canal tiré via une isométrie de Haar V : C^d_in -> C^(K d_out)."""
    if n_kraus * d_out < d_in:
        raise DimensionMismatchError(
            f"{n_kraus} opérateurs {d_out}x{d_in} ne suffisent pas pour un canal"
        )
    v = random_unitary(n_kraus * d_out, rng)[:, :d_in]
    return QuantumChannel(tuple(v[k * d_out:(k + 1) * d_out, :] for k in range(n_kraus)))
