"""
Méthode des types : classes de types d'entrée (ITC), types joints (JTC)
et sous-espaces typiques en fréquence, évalués sur le spectre seul.
"""
import logging
from fractions import Fraction
from functools import lru_cache
from math import comb, log2
from typing import Iterator, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gammaln

from config import EIG_ZERO_TOL, MAX_TYPE_COUNT
from errors import CombinatorialLimitError, DimensionMismatchError, InvalidParameterError
from qmath import as_density

logger = logging.getLogger(__name__)


def as_letters(x, d: int | None = None) -> tuple[int, ...]:
    """Accepte '0112', une liste d'entiers ou un tableau numpy."""
    letters = tuple(int(c) for c in x) if isinstance(x, str) else tuple(int(v) for v in np.ravel(x))
    if d is not None and any(v < 0 or v >= d for v in letters):
        raise InvalidParameterError(f"Lettre hors de l'alphabet [0, {d}) dans {letters}")
    return letters


def _exact(value: float) -> Fraction:
    # lecture décimale (12 chiffres) : 0.1 vaut exactement 1/10
    return Fraction(f"{float(value):.12g}")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

class TypeClass(BaseModel):
    model_config = ConfigDict(frozen=True)

    counts: tuple[int, ...]
    n: int = Field(ge=0)

    @model_validator(mode="after")
    def check_counts(self) -> "TypeClass":
        if any(c < 0 for c in self.counts):
            raise ValueError(f"Comptes négatifs: {self.counts}")
        if sum(self.counts) != self.n:
            raise ValueError(f"Les comptes {self.counts} ne somment pas à n={self.n}")
        return self

    @property
    def d(self) -> int:
        return len(self.counts)

    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / max(self.n, 1)

    def size(self) -> int:
        """Nombre de chaînes du type (coefficient multinomial)."""
        total, remaining = 1, self.n
        for c in self.counts:
            total *= comb(remaining, c)
            remaining -= c
        return total


class JointType(BaseModel):
    model_config = ConfigDict(frozen=True)

    counts: tuple[tuple[int, ...], ...]
    n: int = Field(ge=0)

    @model_validator(mode="after")
    def check_counts(self) -> "JointType":
        flat = [c for row in self.counts for c in row]
        if any(c < 0 for c in flat) or sum(flat) != self.n:
            raise ValueError(f"Type joint invalide: {self.counts} pour n={self.n}")
        if len({len(row) for row in self.counts}) > 1:
            raise ValueError("Lignes de longueurs différentes")
        return self

    def key(self) -> tuple[int, ...]:
        """Index canonique : comptes en ordre ligne par ligne."""
        return tuple(c for row in self.counts for c in row)

    def input_type(self) -> TypeClass:
        return TypeClass(counts=tuple(sum(row) for row in self.counts), n=self.n)

    def output_type(self) -> TypeClass:
        return TypeClass(counts=tuple(int(c) for c in np.sum(self.counts, axis=0)), n=self.n)


def type_of(x, d: int) -> TypeClass:
    letters = as_letters(x, d)
    counts = np.bincount(np.asarray(letters, dtype=int), minlength=d) if letters else np.zeros(d, int)
    return TypeClass(counts=tuple(int(c) for c in counts), n=len(letters))


def joint_type(x, y, d_in: int | None = None, d_out: int | None = None) -> JointType:
    xs, ys = as_letters(x), as_letters(y)
    if len(xs) != len(ys):
        raise DimensionMismatchError(f"Longueurs différentes: {len(xs)} et {len(ys)}")
    d_in = d_in or (max(xs, default=0) + 1)
    d_out = d_out or (max(ys, default=0) + 1)
    counts = np.zeros((d_in, d_out), dtype=int)
    np.add.at(counts, (np.asarray(xs, dtype=int), np.asarray(ys, dtype=int)), 1)
    return JointType(counts=tuple(tuple(int(c) for c in row) for row in counts), n=len(xs))


def count_types(n: int, d: int) -> int:
    if n < 0 or d < 1:
        raise InvalidParameterError(f"Paramètres invalides n={n}, d={d}")
    total = comb(n + d - 1, d - 1)
    if total > MAX_TYPE_COUNT:
        raise CombinatorialLimitError(f"{total} types pour n={n}, d={d} : trop pour une énumération")
    return total


def _compositions(n: int, d: int) -> Iterator[tuple[int, ...]]:
    if d == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, d - 1):
            yield (first,) + rest


@lru_cache(maxsize=128)
def _type_table(n: int, d: int) -> tuple[tuple[int, ...], ...]:
    count_types(n, d)
    return tuple(_compositions(n, d))


@lru_cache(maxsize=128)
def _type_ranks(n: int, d: int) -> dict:
    return {counts: i for i, counts in enumerate(_type_table(n, d))}


def enumerate_types(n: int, d: int) -> list[TypeClass]:
    """Ordre lexicographique des comptes, la lettre 0 la plus fréquente en premier."""
    return [TypeClass(counts=c, n=n) for c in _type_table(n, d)]


def type_index(tc: TypeClass) -> int:
    return _type_ranks(tc.n, tc.d)[tuple(tc.counts)]


def type_from_index(n: int, d: int, index: int) -> TypeClass:
    table = _type_table(n, d)
    if not 0 <= index < len(table):
        raise InvalidParameterError(f"Index de type {index} hors de [0, {len(table)})")
    return TypeClass(counts=table[index], n=n)


def sample_from_type(tc: TypeClass, rng: np.random.Generator) -> tuple[int, ...]:
    """Chaîne uniforme parmi celles du type (mélange du multi-ensemble)."""
    letters = np.repeat(np.arange(tc.d), tc.counts)
    return tuple(int(v) for v in rng.permutation(letters))


def jtc_probability(matrix: np.ndarray, jt: JointType) -> float:
    """(N^n)_{yx} ne dépend que du type joint : prod N[a,b]^{c_ab}."""
    matrix = np.asarray(matrix, dtype=float)
    counts = np.asarray(jt.counts, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.where(counts > 0, counts * np.log(np.where(matrix > 0, matrix, 1.0)), 0.0)
    if np.any((counts > 0) & (matrix == 0)):
        return 0.0
    return float(np.exp(logs.sum()))


# ---------------------------------------------------------------------------
# Ensemble des états propres typiques
# ---------------------------------------------------------------------------

class TypicalSet:
    """
    Ensemble implicite des suites delta-typiques : |N_j(s) - lambda_j n| < delta n.

    Rien n'est matérialisé ; seuls les types admissibles sont énumérés.
    """

    def __init__(self, eigs: Sequence[float], n: int, delta: float):
        eigs = np.asarray(eigs, dtype=float)
        if n < 1 or delta <= 0:
            raise InvalidParameterError(f"Paramètres invalides n={n}, delta={delta}")
        if np.any(eigs < -EIG_ZERO_TOL) or abs(eigs.sum() - 1) > 1e-9:
            raise InvalidParameterError(f"Les valeurs {eigs} ne forment pas une distribution")
        self.eigs = eigs
        self.n = int(n)
        self.delta = float(delta)
        self._targets = [_exact(v) * self.n for v in eigs]
        self._radius = _exact(delta) * self.n

    @property
    def d(self) -> int:
        return len(self.eigs)

    def is_typical_counts(self, counts: Sequence[int]) -> bool:
        return all(abs(c - t) < self._radius for c, t in zip(counts, self._targets))

    def __contains__(self, seq) -> bool:
        letters = as_letters(seq, self.d)
        if len(letters) != self.n:
            return False
        return self.is_typical_counts(type_of(letters, self.d).counts)

    def admissible_types(self) -> list[TypeClass]:
        return [tc for tc in enumerate_types(self.n, self.d) if self.is_typical_counts(tc.counts)]

    def cardinality(self) -> int:
        return sum(tc.size() for tc in self.admissible_types())

    def __len__(self) -> int:
        return self.cardinality()

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        for tc in self.admissible_types():
            yield from _distinct_permutations(tc.counts)


def _distinct_permutations(counts: Sequence[int]) -> Iterator[tuple[int, ...]]:
    counts = list(counts)
    remaining = sum(counts)
    if remaining == 0:
        yield ()
        return
    for letter, c in enumerate(counts):
        if c:
            counts[letter] -= 1
            for tail in _distinct_permutations(counts):
                yield (letter,) + tail
            counts[letter] += 1


def typical_eigenstate_set(eigs: Sequence[float], n: int, delta: float) -> TypicalSet:
    return TypicalSet(eigs, n, delta)


class TypicalSubspaceReport(BaseModel):
    trace_mass: float = Field(ge=0.0, le=1.0)
    min_eig: float
    max_eig: float
    dim: int = Field(ge=0)
    entropy: float
    delta_prime: float
    bounds_ok: tuple[bool, bool, bool]
    n: int
    delta: float
    eps: float
    support_dim: int
    # delta' devient inutilisable quand lambda_min est presque nul
    unstable_constant: bool = False


def typical_subspace_report(rho, n: int, delta: float, eps: float = 0.1) -> TypicalSubspaceReport:
    """
    Vérifie les propriétés 1-3 du sous-espace typique de rho^(x)n par des
    sommes multinomiales exactes sur le spectre (restreint au support).
    """
    rho = as_density(rho)
    eigs = np.clip(rho.eigenvalues(), 0.0, None)
    eigs = np.array(sorted(eigs[eigs > EIG_ZERO_TOL], reverse=True))
    eigs = eigs / eigs.sum()
    typical = TypicalSet(eigs, n, delta)
    support = len(eigs)

    log_eigs = np.log2(eigs)
    entropy = float(-(eigs * log_eigs).sum())
    lam_max, lam_min = float(eigs.max()), float(eigs.min())
    delta_prime = delta * support * log2(lam_max / lam_min)

    mass = 0.0
    dim = 0
    log_vals = []
    for tc in typical.admissible_types():
        counts = np.asarray(tc.counts, dtype=float)
        log_size = gammaln(n + 1) - gammaln(counts + 1).sum()
        log_val = float(counts @ log_eigs)  # log2 de la valeur propre
        mass += float(np.exp(log_size + log_val * np.log(2)))
        dim += tc.size()
        log_vals.append(log_val)

    if log_vals:
        min_log, max_log = min(log_vals), max(log_vals)
        min_eig, max_eig = 2.0**min_log, 2.0**max_log
    else:
        min_log = max_log = float("-inf")
        min_eig = max_eig = 0.0

    slack = 1e-9
    prop1 = mass > 1 - eps
    prop2 = bool(log_vals) and (
        min_log >= -n * (entropy + delta_prime) - slack and max_log <= -n * (entropy - delta_prime) + slack
    )
    log_dim = log2(dim) if dim else float("-inf")
    prop3 = (
        dim > 0
        and log2(1 - eps) + n * (entropy - delta_prime) <= log_dim + slack
        and log_dim <= n * (entropy + delta_prime) + slack
    )
    report = TypicalSubspaceReport(
        trace_mass=min(mass, 1.0),
        min_eig=min_eig,
        max_eig=max_eig,
        dim=dim,
        entropy=entropy,
        delta_prime=delta_prime,
        bounds_ok=(bool(prop1), bool(prop2), bool(prop3)),
        n=n,
        delta=delta,
        eps=eps,
        support_dim=support,
        unstable_constant=lam_min < 1e-6,
    )
    logger.debug("Rapport typique n=%d delta=%g: %s", n, delta, report)
    return report
