"""
Capacités : Holevo chi, maximisation de C_E par gradient conditionnel
(Frank-Wolfe), variante sous contrainte linéaire, familles du canal
d'amortissement d'amplitude, borne de la mesure en racine carrée,
contrôles d'additivité et de concavité.
"""
import logging
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.optimize import minimize, minimize_scalar
from scipy.special import entr

from channels import Ensemble, amplitude_damping
from config import (
    AD_XATOL,
    DEFAULT_CE_TOL,
    EIG_ZERO_TOL,
    LINE_SEARCH_XATOL,
    MAX_ITERS,
    MAX_OPTIMIZER_DIM,
    STATE_TOL,
)
from errors import (
    ConvergenceError,
    DimensionLimitError,
    DimensionMismatchError,
    InvalidParameterError,
    OptimizationCancelled,
)
from qmath import (
    LN2,
    DensityOperator,
    PureState,
    QuantumChannel,
    adjoint_kraus,
    apply_channel,
    apply_kraus,
    as_density,
    binary_entropy,
    canonical_eigh,
    entropy_of_matrix,
    environment_adjoint,
    environment_matrix,
    log2_matrix,
    matrix_to_json,
    tensor_channels,
    von_neumann_entropy,
)

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, float, float], Optional[bool]]


class CeResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: float
    argmax_rho: DensityOperator
    iterations: int = Field(ge=0)
    gap_bound: float

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "rho": matrix_to_json(self.argmax_rho.mat),
            "iterations": self.iterations,
            "gap_bound": self.gap_bound,
        }


class EnergyConstraint(BaseModel):
    """tr(O rho) <= bound."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    observable: np.ndarray
    bound: float = Field(ge=0.0)

    @field_validator("observable", mode="before")
    @classmethod
    def check_observable(cls, value) -> np.ndarray:
        obs = np.asarray(value, dtype=complex)
        if obs.ndim != 2 or obs.shape[0] != obs.shape[1]:
            raise ValueError(f"Observable carrée attendue (reçu: forme {obs.shape})")
        if np.max(np.abs(obs - obs.conj().T)) > STATE_TOL:
            raise ValueError("L'observable doit être hermitienne")
        return (obs + obs.conj().T) / 2


# ---------------------------------------------------------------------------
# Holevo chi
# ---------------------------------------------------------------------------

def holevo_chi(ens: Ensemble) -> float:
    """chi = H(sum p_i rho_i) - sum p_i H(rho_i)."""
    average = ens.average()
    value = von_neumann_entropy(average) - sum(p * von_neumann_entropy(rho) for p, rho in ens.items)
    return float(np.clip(value, 0.0, np.log2(ens.dim)))


def orthogonal_input_chi(ch: QuantumChannel) -> float:
    """chi de l'ensemble uniforme {N(|i><i|)} sur la base de calcul."""
    d = ch.d_in
    items = tuple((1.0 / d, apply_channel(ch, DensityOperator.basis(d, i))) for i in range(d))
    return holevo_chi(Ensemble(items))


# ---------------------------------------------------------------------------
# Objectif f(rho) = H(rho) + H(N(rho)) - H(E(rho)) et son gradient
# ---------------------------------------------------------------------------

def _objective(stack: np.ndarray, rho: np.ndarray) -> float:
    return (
        entropy_of_matrix(rho)
        + entropy_of_matrix(apply_kraus(stack, rho))
        - entropy_of_matrix(environment_matrix(stack, rho))
    )


def _gradient(stack: np.ndarray, rho: np.ndarray) -> np.ndarray:
    # les constantes -I/ln2 s'annulent sur les directions de trace nulle
    grad = (
        -log2_matrix(rho)
        - adjoint_kraus(stack, log2_matrix(apply_kraus(stack, rho)))
        + environment_adjoint(stack, log2_matrix(environment_matrix(stack, rho)))
    )
    return (grad + grad.conj().T) / 2


def ce_objective(ch: QuantumChannel, rho) -> float:
    rho = as_density(rho)
    if rho.dim != ch.d_in:
        raise DimensionMismatchError(f"Dimension d'entrée {ch.d_in} attendue, état de dimension {rho.dim}")
    return _objective(ch.stack, rho.mat)


def _top_vector(mat: np.ndarray) -> tuple[float, np.ndarray]:
    eigs, vecs = canonical_eigh(mat)
    return float(eigs[0]), vecs[:, 0]


def _line_search(stack: np.ndarray, rho: np.ndarray, target: np.ndarray, value: float):
    """Recherche exacte du pas sur [0, 1] ; gamma=1 et gamma=0 sont aussi comparés."""
    direction = target - rho
    res = minimize_scalar(
        lambda g: -_objective(stack, rho + g * direction),
        bounds=(0.0, 1.0),
        method="bounded",
        options={"xatol": LINE_SEARCH_XATOL},
    )
    candidates = [(float(res.x), -float(res.fun)), (1.0, _objective(stack, target)), (0.0, value)]
    return max(candidates, key=lambda c: c[1])


def _frank_wolfe(
    ch: QuantumChannel,
    tol: float,
    start: np.ndarray,
    oracle: Callable[[np.ndarray], tuple[float, np.ndarray]],
    callback: Optional[ProgressCallback],
) -> CeResult:
    stack = ch.stack
    rho = start
    value = _objective(stack, rho)
    gap = np.inf
    for iteration in range(MAX_ITERS + 1):
        grad = _gradient(stack, rho)
        best_linear, target = oracle(grad)
        gap = max(best_linear - float(np.real(np.trace(grad @ rho))), 0.0)
        best = CeResult(value=value, argmax_rho=DensityOperator(rho), iterations=iteration, gap_bound=gap)
        if callback is not None and callback(iteration, value, gap):
            raise OptimizationCancelled(f"Optimisation interrompue à l'itération {iteration}", best=best)
        if gap <= tol:
            logger.info("C_E = %.10f bits (itérations: %d, écart: %.2e)", value, iteration, gap)
            return best
        if iteration == MAX_ITERS:
            break
        gamma, new_value = _line_search(stack, rho, target, value)
        if gamma == 0.0:
            logger.warning("Aucun pas ascendant à l'itération %d (écart %.2e)", iteration, gap)
            raise ConvergenceError(f"Ascension bloquée avec un écart {gap:.3e} > {tol:.1e}", best=best)
        rho = rho + gamma * (target - rho)
        rho = (rho + rho.conj().T) / 2
        value = new_value
        logger.debug("itération %d: f=%.12f écart=%.3e pas=%.3e", iteration, value, gap, gamma)
    raise ConvergenceError(f"Pas de convergence en {MAX_ITERS} itérations (écart {gap:.3e})", best=best)


def _check_dim(ch: QuantumChannel) -> None:
    if ch.d_in > MAX_OPTIMIZER_DIM:
        raise DimensionLimitError(
            f"Dimension d'entrée {ch.d_in} au-delà de la limite de l'optimiseur ({MAX_OPTIMIZER_DIM})"
        )


def ce_maximize(
    ch: QuantumChannel,
    tol: float = DEFAULT_CE_TOL,
    callback: Optional[ProgressCallback] = None,
) -> CeResult:
    """
    C_E(N) = max_rho H(rho) + H(N(rho)) - H(E(rho)) par Frank-Wolfe.

    Départ en I/d ; oracle linéaire = vecteur propre dominant du gradient ;
    arrêt quand l'écart de Frank-Wolfe (borne certifiée de sous-optimalité
    par concavité) passe sous `tol`.
    """
    if tol <= 0:
        raise InvalidParameterError(f"La tolérance doit être > 0 (reçu: {tol})")
    _check_dim(ch)

    def oracle(grad):
        top, vec = _top_vector(grad)
        return top, np.outer(vec, vec.conj())

    start = np.eye(ch.d_in, dtype=complex) / ch.d_in
    return _frank_wolfe(ch, tol, start, oracle, callback)


def _constrained_oracle(constraint: EnergyConstraint):
    """
    Oracle sur {S : tr(O S) <= b}.

    Candidats : le vecteur dominant v de G (ou de G - mu* O, mu* minimisant
    la borne duale lambda_max(G - mu O) + mu b) s'il est admissible, sinon
    le mélange de v avec le vecteur propre fondamental w de O qui sature
    la contrainte. Le meilleur candidat est retenu.
    """
    obs, bound = constraint.observable, constraint.bound
    obs_eigs, obs_vecs = canonical_eigh(obs)
    o_min, w = float(obs_eigs[-1]), obs_vecs[:, -1]
    ground = np.outer(w, w.conj())
    scale = max(float(np.max(np.abs(obs_eigs))), 1.0)

    def candidate(grad, vec):
        o_v = float(np.real(vec.conj() @ obs @ vec))
        proj = np.outer(vec, vec.conj())
        if o_v <= bound:
            target = proj
        else:
            mix = (bound - o_min) / (o_v - o_min)
            target = mix * proj + (1 - mix) * ground
        return float(np.real(np.trace(grad @ target))), target

    def oracle(grad):
        _, v_top = _top_vector(grad)
        spread = float(np.ptp(np.linalg.eigvalsh(grad)))
        res = minimize_scalar(
            lambda mu: np.linalg.eigvalsh(grad - mu * obs)[-1] + mu * bound,
            bounds=(0.0, 2 * spread / scale + 1.0),
            method="bounded",
            options={"xatol": LINE_SEARCH_XATOL},
        )
        _, v_dual = _top_vector(grad - res.x * obs)
        return max((candidate(grad, v_top), candidate(grad, v_dual)), key=lambda c: c[0])

    return oracle, o_min, ground


def ce_maximize_constrained(
    ch: QuantumChannel,
    constraint: EnergyConstraint,
    tol: float = DEFAULT_CE_TOL,
    callback: Optional[ProgressCallback] = None,
) -> CeResult:
    """C_E restreint aux états d'énergie moyenne tr(O rho) <= b."""
    if tol <= 0:
        raise InvalidParameterError(f"La tolérance doit être > 0 (reçu: {tol})")
    _check_dim(ch)
    d = ch.d_in
    if constraint.observable.shape != (d, d):
        raise DimensionMismatchError(f"Observable {d}x{d} attendue, forme {constraint.observable.shape}")
    oracle, o_min, ground = _constrained_oracle(constraint)
    if constraint.bound < o_min - STATE_TOL:
        raise InvalidParameterError(
            f"Contrainte infaisable: borne {constraint.bound} < plus petite valeur propre {o_min}"
        )
    mixed = np.eye(d, dtype=complex) / d
    mean = float(np.real(np.trace(constraint.observable))) / d
    if mean <= constraint.bound:
        start = mixed
    else:
        t = (mean - constraint.bound) / (mean - o_min)
        start = (1 - t) * mixed + t * ground
    return _frank_wolfe(ch, tol, start, oracle, callback)


# ---------------------------------------------------------------------------
# Oracle indépendant : grille sur la boule de Bloch (qubits)
# ---------------------------------------------------------------------------

_PAULIS = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]],
    dtype=complex,
)


def _batched_entropy(mats: np.ndarray) -> np.ndarray:
    eigs = np.linalg.eigvalsh(mats)
    eigs = np.where(eigs < EIG_ZERO_TOL, 0.0, eigs)
    return entr(eigs).sum(axis=-1) / LN2


def _bloch_states(points: np.ndarray) -> np.ndarray:
    return (np.eye(2, dtype=complex) + np.einsum("mi,iab->mab", points, _PAULIS)) / 2


def _batched_objective(stack: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    outputs = np.einsum("kab,mbc,kdc->mad", stack, rhos, stack.conj())
    envs = np.einsum("kab,mbc,lac->mkl", stack, rhos, stack.conj())
    return _batched_entropy(rhos) + _batched_entropy(outputs) - _batched_entropy(envs)


def bloch_grid_ce(ch: QuantumChannel, resolution: float = 0.01, polish: bool = True) -> tuple[float, np.ndarray]:
    """
    Recherche exhaustive sur la grille cartésienne de la boule de Bloch,
    puis raffinement local (Nelder-Mead) depuis le meilleur point.
    Retourne (valeur, vecteur de Bloch).
    """
    if ch.d_in != 2:
        raise DimensionMismatchError(f"La grille de Bloch exige un qubit en entrée (reçu: d={ch.d_in})")
    axis = np.arange(-1.0, 1.0 + resolution / 2, resolution)
    best_value, best_point = -np.inf, np.zeros(3)
    for x in axis:
        yy, zz = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([np.full(yy.size, x), yy.ravel(), zz.ravel()])
        pts = pts[np.einsum("mi,mi->m", pts, pts) <= 1.0 + 1e-12]
        if not len(pts):
            continue
        values = _batched_objective(ch.stack, _bloch_states(pts))
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value, best_point = float(values[i]), pts[i]

    if polish:
        def neg(r):
            norm = np.linalg.norm(r)
            r = r / norm if norm > 1 else r
            return -float(_batched_objective(ch.stack, _bloch_states(r[None, :]))[0])

        res = minimize(neg, best_point, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
        if -res.fun > best_value:
            r = res.x / max(np.linalg.norm(res.x), 1.0)
            best_value, best_point = float(-res.fun), r
    return best_value, best_point


# ---------------------------------------------------------------------------
# Formes closes
# ---------------------------------------------------------------------------

def _shannon_bits(probs: Sequence[float]) -> float:
    return float(entr(np.asarray(probs, dtype=float)).sum() / LN2)


def depolarizing_ce(d: int, q: float) -> float:
    """2 log2 d - H(1 - q + q/d^2, q/d^2 x (d^2 - 1))."""
    probs = [1 - q + q / d**2] + [q / d**2] * (d**2 - 1)
    return 2 * np.log2(d) - _shannon_bits(probs)


def depolarizing_chi(d: int, q: float) -> float:
    """log2 d - H(1 - q + q/d, q/d x (d - 1)) : entrées orthogonales."""
    probs = [1 - q + q / d] + [q / d] * (d - 1)
    return np.log2(d) - _shannon_bits(probs)


def erasure_ce(d: int, p: float) -> float:
    return 2 * (1 - p) * np.log2(d)


# ---------------------------------------------------------------------------
# Amortissement d'amplitude
# ---------------------------------------------------------------------------

def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p doit être dans [0, 1] (reçu: {p})")


def ad_objective(p: float, x: float) -> float:
    """f(diag(1-x, x)) = H2(x) + H2((1-p) x) - H2(p x)."""
    return binary_entropy(x) + binary_entropy((1 - p) * x) - binary_entropy(p * x)


def _maximize_unit(func: Callable[[float], float]) -> tuple[float, float]:
    res = minimize_scalar(lambda x: -func(x), bounds=(0.0, 1.0), method="bounded", options={"xatol": AD_XATOL})
    return -float(res.fun), float(res.x)


def ad_ce(p: float) -> tuple[float, float]:
    """C_E du canal d'amortissement : maximum sur la famille diagonale."""
    _check_p(p)
    value, x = _maximize_unit(lambda x: ad_objective(p, x))
    return max(value, 0.0), x


def _ad_pair(x: float) -> tuple[np.ndarray, np.ndarray]:
    off = np.sqrt(x * (1 - x))
    plus = np.array([[1 - x, off], [off, x]], dtype=complex)
    minus = np.array([[1 - x, -off], [-off, x]], dtype=complex)
    return plus, minus


def ad_chi_at(p: float, x: float) -> float:
    """chi de {(1/2, N(rho_{x,+})), (1/2, N(rho_{x,-}))}."""
    ch = amplitude_damping(p)
    plus, minus = _ad_pair(x)
    ens = Ensemble(((0.5, apply_channel(ch, plus)), (0.5, apply_channel(ch, minus))))
    return holevo_chi(ens)


def ad_ch(p: float) -> tuple[float, float]:
    """C_H restreint à la famille à deux états symétriques."""
    _check_p(p)
    value, x = _maximize_unit(lambda x: ad_chi_at(p, x))
    return max(value, 0.0), x


def ad_asymptotics(p: float, x: float) -> tuple[float, float]:
    """Termes dominants quand p -> 1 : -x(1-p)log2(1-p) et -x(1-x)(1-p)log2(1-p)."""
    if not (0.0 < p < 1.0 and 0.0 < x < 1.0):
        raise InvalidParameterError(f"p et x doivent être dans ]0, 1[ (reçu: p={p}, x={x})")
    base = -(1 - p) * np.log2(1 - p)
    return x * base, x * (1 - x) * base


def ad_sweep(p_values: Sequence[float]) -> pd.DataFrame:
    rows = []
    for p in p_values:
        ce, x_ce = ad_ce(p)
        ch, x_ch = ad_ch(p)
        rows.append({"p": p, "ce": ce, "ch": ch, "ratio": ce / ch if ch > 0 else np.nan, "x_ce": x_ce, "x_ch": x_ch})
    return pd.DataFrame(rows, columns=["p", "ce", "ch", "ratio", "x_ce", "x_ch"])


# ---------------------------------------------------------------------------
# Mesure en racine carrée
# ---------------------------------------------------------------------------

def pgm_error(codewords: Sequence[PureState], projector) -> tuple[list[float], list[float]]:
    """
    Erreur exacte de la mesure en racine carrée après projection, et la
    borne 2(1 - S_ii) + sum_{j != i} |S_ij|^2 avec S_ij = <t_i|P|t_j>.
    """
    if not codewords:
        raise InvalidParameterError("Aucun mot de code")
    proj = np.asarray(projector, dtype=complex)
    vecs = np.column_stack([np.asarray(c.vec if isinstance(c, PureState) else c, dtype=complex) for c in codewords])
    if proj.shape != (vecs.shape[0], vecs.shape[0]):
        raise DimensionMismatchError(f"Projecteur {proj.shape} incompatible avec des mots de dimension {vecs.shape[0]}")
    if np.max(np.abs(proj @ proj - proj)) > 1e-9 or np.max(np.abs(proj - proj.conj().T)) > 1e-9:
        raise InvalidParameterError("Le projecteur doit être hermitien et idempotent")
    if np.max(np.abs(np.linalg.norm(vecs, axis=0) - 1)) > 1e-9:
        raise InvalidParameterError("Les mots de code doivent être normés")

    projected = proj @ vecs
    phi = projected @ projected.conj().T
    eigs, basis = np.linalg.eigh(phi)
    if np.all(eigs < EIG_ZERO_TOL):
        raise InvalidParameterError("Tous les vecteurs projetés sont nuls : phi est singulière")
    inv_sqrt = np.where(eigs > EIG_ZERO_TOL, 1.0 / np.sqrt(np.clip(eigs, EIG_ZERO_TOL, None)), 0.0)
    phi_inv_sqrt = (basis * inv_sqrt) @ basis.conj().T

    gram = projected.conj().T @ projected
    amplitudes = np.einsum("ai,ab,bi->i", projected.conj(), phi_inv_sqrt, projected)
    exact = np.clip(1 - np.abs(amplitudes) ** 2, 0.0, 1.0)
    off = np.abs(gram) ** 2
    np.fill_diagonal(off, 0.0)
    bound = 2 * (1 - np.real(np.diag(gram))) + off.sum(axis=1)
    return exact.tolist(), bound.tolist()


# ---------------------------------------------------------------------------
# Additivité et concavité
# ---------------------------------------------------------------------------

def ce_additivity_slack(ch1: QuantumChannel, ch2: QuantumChannel, tol: float = DEFAULT_CE_TOL) -> float:
    """|C_E(N1 (x) N2) - C_E(N1) - C_E(N2)|."""
    if ch1.d_in * ch2.d_in > MAX_OPTIMIZER_DIM:
        raise DimensionLimitError(
            f"Canal produit de dimension {ch1.d_in * ch2.d_in} > {MAX_OPTIMIZER_DIM}"
        )
    joint = ce_maximize(tensor_channels(ch1, ch2), tol).value
    return abs(joint - ce_maximize(ch1, tol).value - ce_maximize(ch2, tol).value)


def concavity_slack(ch: QuantumChannel, rho0, rho1, p0: float) -> float:
    """f(p0 rho0 + p1 rho1) - p0 f(rho0) - p1 f(rho1), positif par concavité."""
    _check_p(p0)
    rho0, rho1 = as_density(rho0), as_density(rho1)
    if rho0.dim != rho1.dim:
        raise DimensionMismatchError(f"États de dimensions {rho0.dim} et {rho1.dim}")
    mixed = p0 * rho0.mat + (1 - p0) * rho1.mat
    return ce_objective(ch, mixed) - p0 * ce_objective(ch, rho0) - (1 - p0) * ce_objective(ch, rho1)
