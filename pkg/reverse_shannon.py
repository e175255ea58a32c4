"""
Théorème de Shannon inverse classique : simulation exacte d'un canal
discret sans mémoire (DMC) sur un canal de bits parfait aidé d'aléa partagé.

Deux protocoles :
- `bsc_simulate` pour le canal binaire symétrique (appariement par distance
  de Hamming) ;
- `dmc_simulate` pour un DMC quelconque (un ensemble Z par classe de type
  d'entrée, appariement par type joint).

L'aléa partagé n'est jamais matérialisé : chaque bloc de Z_CHUNK éléments
est régénéré à la demande à partir de (graine, étiquette, indices).
"""
import hashlib
import logging
from collections import Counter
from functools import lru_cache
from itertools import combinations_with_replacement, product
from math import ceil, factorial, log1p
from typing import Callable, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import comb, rel_entr
from scipy.stats import binom, chisquare

from config import (
    BA_MAX_ITERS,
    DEFAULT_BA_TOL,
    ORACLE_MAX_COMBINATIONS,
    Z_CHUNK,
    get_settings,
)
from errors import (
    CombinatorialLimitError,
    ConvergenceError,
    InvalidChannelError,
    InvalidParameterError,
)
from qmath import LN2, binary_entropy
from typeclasses import (
    TypeClass,
    as_letters,
    count_types,
    joint_type,
    jtc_probability,
    sample_from_type,
    type_from_index,
    type_index,
    type_of,
)

logger = logging.getLogger(__name__)

MAX_Z_SIZE = 2**32
MAX_HISTOGRAM_BINS = 10**4


# ---------------------------------------------------------------------------
# Canal discret sans mémoire
# ---------------------------------------------------------------------------

class DMC(BaseModel):
    """Matrice stochastique N_yx : ligne = entrée x, colonne = sortie y."""

    model_config = ConfigDict(frozen=True)

    matrix: list[list[float]]

    @field_validator("matrix")
    @classmethod
    def check_matrix(cls, matrix: list[list[float]]) -> list[list[float]]:
        if not matrix or not matrix[0]:
            raise ValueError("Matrice de transition vide")
        if len({len(row) for row in matrix}) != 1:
            raise ValueError("Toutes les lignes doivent avoir la même longueur")
        arr = np.asarray(matrix, dtype=float)
        if np.any(arr < 0) or np.any(arr > 1):
            raise ValueError(f"Probabilités hors de [0, 1] (reçu: min={arr.min()}, max={arr.max()})")
        sums = arr.sum(axis=1)
        if np.max(np.abs(sums - 1)) > 1e-12:
            raise ValueError(f"Les lignes doivent sommer à 1 (reçu: {sums.tolist()})")
        return matrix

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    @property
    def d_in(self) -> int:
        return len(self.matrix)

    @property
    def d_out(self) -> int:
        return len(self.matrix[0])

    def key(self) -> tuple:
        return tuple(tuple(row) for row in self.matrix)


def bsc(p: float) -> DMC:
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p doit être dans [0, 1] (reçu: {p})")
    return DMC(matrix=[[1 - p, p], [p, 1 - p]])


def _check_distribution(q, d: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (d,) or np.any(q < 0) or abs(q.sum() - 1) > 1e-9:
        raise InvalidParameterError(f"Distribution d'entrée invalide: {q.tolist()} (attendu {d} valeurs)")
    return q


def _divergences(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    """D(N(.|x) || qN) en nats pour chaque entrée x."""
    r = q @ matrix
    return rel_entr(matrix, r[None, :]).sum(axis=1)


def constrained_mi(dmc: DMC, q) -> float:
    """I(N, q) en bits."""
    q = _check_distribution(q, dmc.d_in)
    return max(float(q @ _divergences(dmc.array, q)) / LN2, 0.0)


mutual_information = constrained_mi


def ba_capacity(dmc: DMC, tol: float = DEFAULT_BA_TOL) -> tuple[float, np.ndarray]:
    """
    Capacité de Shannon par Blahut-Arimoto.

    Arrêt quand max_x D(N_x || qN) - I(q) <= tol (encadrement de C).
    Retourne (C en bits, distribution q* atteignant C).
    """
    matrix = dmc.array
    q = np.full(dmc.d_in, 1.0 / dmc.d_in)
    lower = 0.0
    for iteration in range(BA_MAX_ITERS):
        div = _divergences(matrix, q)
        lower, upper = float(q @ div), float(div.max())
        if upper - lower <= tol * LN2:
            logger.info("Blahut-Arimoto: C=%.12f bits en %d itérations", lower / LN2, iteration)
            return max(lower / LN2, 0.0), q
        q = q * np.exp(div - div.max())
        q /= q.sum()
    raise ConvergenceError(
        f"Blahut-Arimoto n'a pas convergé en {BA_MAX_ITERS} itérations",
        best=(lower / LN2, q),
    )


def type_capacity(dmc: DMC, tc: TypeClass) -> float:
    """C_k : information mutuelle mono-lettre de la distribution empirique du type."""
    return constrained_mi(dmc, tc.frequencies())


def z_size(rate: float, n: int, eps: float) -> int:
    """|Z| = ceil(2^{n(rate + eps/2)}) ; rate nul -> 2^{ceil(n eps / 2)}."""
    if rate <= 1e-15:
        size = 2 ** ceil(n * eps / 2)
    else:
        exponent = n * (rate + eps / 2)
        if exponent > 32:
            raise CombinatorialLimitError(f"|Z| = 2^{exponent:.2f} : trop grand pour un balayage")
        size = ceil(2.0**exponent)
    if size > MAX_Z_SIZE:
        raise CombinatorialLimitError(f"|Z| = {size} : trop grand pour un balayage")
    return max(int(size), 1)


@lru_cache(maxsize=64)
def _jtc_invariance(matrix_key: tuple, n: int) -> bool:
    matrix = np.asarray(matrix_key, dtype=float)
    d_in, d_out = matrix.shape
    while n > 1 and (d_in * d_out) ** n > 10**5:
        n -= 1
    for xs in product(range(d_in), repeat=n):
        for ys in product(range(d_out), repeat=n):
            direct = float(np.prod(matrix[list(xs), list(ys)]))
            by_type = jtc_probability(matrix, joint_type(xs, ys, d_in, d_out))
            if abs(direct - by_type) > 1e-12:
                return False
    return True


def check_jtc_invariance(dmc: DMC, n: int) -> None:
    """(N^n)_{yx} ne doit dépendre que du type joint de (x, y)."""
    if not _jtc_invariance(dmc.key(), n):
        raise InvalidChannelError("La probabilité de transition n'est pas constante sur les types joints")


# ---------------------------------------------------------------------------
# Aléa partagé et configuration
# ---------------------------------------------------------------------------

class SharedRandomness(BaseModel):
    """Graine commune ; chaque flux dérive de (graine, étiquette, indices)."""

    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, lt=2**64)

    def _key(self, tag: str, indices: Sequence[int]) -> int:
        text = f"{self.seed}:{tag}:" + ",".join(str(int(i)) for i in indices)
        return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=16).digest(), "big")

    def generator(self, tag: str, *indices: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self._key(tag, indices)))

    def raw(self, tag: str, *indices: int, size: int) -> np.ndarray:
        """Mots de 64 bits bruts (uniformes) du flux (tag, indices)."""
        return np.random.Philox(key=self._key(tag, indices)).random_raw(size)

    def trial(self, t: int) -> "SharedRandomness":
        state = np.random.SeedSequence([self.seed, int(t)]).generate_state(1, dtype=np.uint64)
        return SharedRandomness(seed=int(state[0]))


class ProtocolConfig(BaseModel):
    n: int = Field(ge=1)
    eps: float = Field(gt=0)
    variant: Literal["bsc", "general"] = "general"
    # force |Z| (oracle, tests) au lieu de ceil(2^{n(C+eps/2)})
    z_size: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def check_length(self) -> "ProtocolConfig":
        if self.variant == "bsc" and self.n > 63:
            raise ValueError(f"Le protocole BSC code les chaînes sur 64 bits (reçu: n={self.n})")
        return self


class Transcript(BaseModel):
    bits_sent: int = Field(ge=1)
    fallback: bool
    itc_bits: int = Field(ge=0)
    index_bits: int = Field(ge=0)
    raw_bits: int = Field(ge=0)
    payload: str
    output: tuple[int, ...]
    itc_index: Optional[int] = None
    z_index: Optional[int] = None
    z_size: int = Field(ge=1)

    @model_validator(mode="after")
    def check_framing(self) -> "Transcript":
        expected = self.itc_bits + 1 + (self.raw_bits if self.fallback else self.index_bits)
        if self.bits_sent != expected or len(self.payload) != expected:
            raise ValueError(
                f"Trame incohérente: {self.bits_sent} bits annoncés, {len(self.payload)} envoyés, {expected} attendus"
            )
        if set(self.payload) - {"0", "1"}:
            raise ValueError("La charge utile doit être une chaîne de 0 et de 1")
        return self


def _width(count: int) -> int:
    """ceil(log2 count) bits pour indexer `count` valeurs."""
    return max(int(count) - 1, 0).bit_length()


def _raw_width(n: int, d_out: int) -> int:
    return _width(d_out**n)


def _encode(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def _pack_letters(letters: Sequence[int], base: int) -> int:
    value = 0
    for letter in letters:
        value = value * base + int(letter)
    return value


def _unpack_letters(value: int, base: int, n: int) -> tuple[int, ...]:
    letters = []
    for _ in range(n):
        value, letter = divmod(value, base)
        letters.append(letter)
    return tuple(reversed(letters))


def _chunk_count(size: int) -> int:
    return -(-size // Z_CHUNK)


def _chunk_len(size: int, c: int) -> int:
    return min(Z_CHUNK, size - c * Z_CHUNK)


def _sender_rng(R: SharedRandomness, rng: Optional[np.random.Generator]) -> np.random.Generator:
    # flux privé de l'émetteur ; le récepteur n'utilise jamais cette étiquette
    return rng if rng is not None else R.generator("sender")


def _reservoir_pick(total: int, hits: np.ndarray, offset: int, chosen, rng: np.random.Generator):
    """Tirage uniforme en un passage : bloc retenu avec probabilité m / total."""
    if rng.random() * total < hits.size:
        return offset + int(hits[rng.integers(hits.size)])
    return chosen


# ---------------------------------------------------------------------------
# Protocole BSC
# ---------------------------------------------------------------------------

def _bsc_chunk(R: SharedRandomness, n: int, c: int) -> np.ndarray:
    mask = np.uint64((1 << n) - 1)
    return R.raw("Z", n, c, size=Z_CHUNK) & mask


def _bsc_size(p: float, cfg: ProtocolConfig) -> int:
    return cfg.z_size or z_size(1.0 - binary_entropy(p), cfg.n, cfg.eps)


def bsc_simulate(
    p: float,
    cfg: ProtocolConfig,
    R: SharedRandomness,
    x,
    rng: Optional[np.random.Generator] = None,
) -> tuple[tuple[int, ...], Transcript]:
    """
    Simule BSC(p)^n sur l'entrée x.

    Z contient |Z| chaînes uniformes de n bits ; on cherche un élément à la
    même distance de Hamming de x que la sortie provisoire y, sinon on
    envoie y en clair.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p doit être dans [0, 1] (reçu: {p})")
    letters = as_letters(x, 2)
    n = cfg.n
    if len(letters) != n:
        raise InvalidParameterError(f"L'entrée doit compter n={n} lettres (reçu: {len(letters)})")
    rng = _sender_rng(R, rng)
    size = _bsc_size(p, cfg)

    flips = rng.random(n) < p
    y = tuple(int(a) ^ int(f) for a, f in zip(letters, flips))
    distance = int(flips.sum())
    x_value = np.uint64(_pack_letters(letters, 2))

    total, chosen = 0, None
    for c in range(_chunk_count(size)):
        block = _bsc_chunk(R, n, c)[: _chunk_len(size, c)]
        hits = np.flatnonzero(np.bitwise_count(block ^ x_value) == distance)
        if hits.size:
            total += hits.size
            chosen = _reservoir_pick(total, hits, c * Z_CHUNK, chosen, rng)

    index_bits, raw_bits = _width(size), _raw_width(n, 2)
    if chosen is None:
        payload = "1" + _encode(_pack_letters(y, 2), raw_bits)
        output = y
    else:
        payload = "0" + _encode(chosen, index_bits)
        output = _unpack_letters(int(_bsc_chunk(R, n, chosen // Z_CHUNK)[chosen % Z_CHUNK]), 2, n)
    transcript = Transcript(
        bits_sent=len(payload),
        fallback=chosen is None,
        itc_bits=0,
        index_bits=index_bits,
        raw_bits=raw_bits,
        payload=payload,
        output=output,
        z_index=chosen,
        z_size=size,
    )
    logger.debug("BSC n=%d d=%d |Z|=%d correspondances=%d", n, distance, size, total)
    return output, transcript


# ---------------------------------------------------------------------------
# Protocole général (classes de types)
# ---------------------------------------------------------------------------

def _dmc_chunk(
    dmc: DMC, tc: TypeClass, R: SharedRandomness, k: int, c: int
) -> tuple[np.ndarray, np.ndarray]:
    """Bloc c de Z(R, n, k) : x' uniforme dans le type k, puis y' = N(x')."""
    n = tc.n
    base = np.repeat(np.arange(dmc.d_in), tc.counts)
    xs = R.generator("X", n, k, c).permuted(np.tile(base, (Z_CHUNK, 1)), axis=1)
    u = R.generator("Y", n, k, c).random((Z_CHUNK, n))
    cdf = np.cumsum(dmc.array, axis=1)
    ys = (u[..., None] >= cdf[xs]).sum(axis=-1)
    return xs, np.minimum(ys, dmc.d_out - 1)


def _pair_counts(x: np.ndarray, ys: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    codes = x[None, :] * d_out + ys
    return np.stack([(codes == code).sum(axis=1) for code in range(d_in * d_out)], axis=1)


def _dmc_size(dmc: DMC, cfg: ProtocolConfig, tc: TypeClass) -> int:
    return cfg.z_size or z_size(type_capacity(dmc, tc), cfg.n, cfg.eps)


def dmc_simulate(
    dmc: DMC,
    cfg: ProtocolConfig,
    R: SharedRandomness,
    x,
    rng: Optional[np.random.Generator] = None,
) -> tuple[tuple[int, ...], Transcript]:
    """Simule N^n sur l'entrée x avec le protocole par classes de types."""
    letters = as_letters(x, dmc.d_in)
    n = cfg.n
    if len(letters) != n:
        raise InvalidParameterError(f"L'entrée doit compter n={n} lettres (reçu: {len(letters)})")
    check_jtc_invariance(dmc, n)
    rng = _sender_rng(R, rng)

    tc = type_of(letters, dmc.d_in)
    k = type_index(tc)
    itc_bits = _width(count_types(n, dmc.d_in))
    size = _dmc_size(dmc, cfg, tc)

    cdf = np.cumsum(dmc.array, axis=1)
    u = rng.random(n)
    x_arr = np.asarray(letters, dtype=int)
    y = tuple(int(v) for v in np.minimum((u[:, None] >= cdf[x_arr]).sum(axis=1), dmc.d_out - 1))
    target = np.bincount(x_arr * dmc.d_out + np.asarray(y), minlength=dmc.d_in * dmc.d_out)

    total, chosen = 0, None
    for c in range(_chunk_count(size)):
        _, ys = _dmc_chunk(dmc, tc, R, k, c)
        ys = ys[: _chunk_len(size, c)]
        counts = _pair_counts(x_arr, ys, dmc.d_in, dmc.d_out)
        hits = np.flatnonzero((counts == target).all(axis=1))
        if hits.size:
            total += hits.size
            chosen = _reservoir_pick(total, hits, c * Z_CHUNK, chosen, rng)

    index_bits, raw_bits = _width(size), _raw_width(n, dmc.d_out)
    prefix = _encode(k, itc_bits)
    if chosen is None:
        payload = prefix + "1" + _encode(_pack_letters(y, dmc.d_out), raw_bits)
        output = y
    else:
        payload = prefix + "0" + _encode(chosen, index_bits)
        _, ys = _dmc_chunk(dmc, tc, R, k, chosen // Z_CHUNK)
        output = tuple(int(v) for v in ys[chosen % Z_CHUNK])
    transcript = Transcript(
        bits_sent=len(payload),
        fallback=chosen is None,
        itc_bits=itc_bits,
        index_bits=index_bits,
        raw_bits=raw_bits,
        payload=payload,
        output=output,
        itc_index=k,
        z_index=chosen,
        z_size=size,
    )
    logger.debug("DMC n=%d type=%d |Z|=%d correspondances=%d", n, k, size, total)
    return output, transcript


def _bsc_parameter(dmc: DMC) -> float:
    arr = dmc.array
    if arr.shape != (2, 2) or abs(arr[0, 1] - arr[1, 0]) > 1e-12:
        raise InvalidParameterError("La variante bsc exige un canal binaire symétrique")
    return float(arr[0, 1])


def simulate(
    channel: "float | DMC",
    cfg: ProtocolConfig,
    R: SharedRandomness,
    x,
    rng: Optional[np.random.Generator] = None,
) -> tuple[tuple[int, ...], Transcript]:
    """Aiguille vers le protocole BSC ou général selon `cfg.variant`."""
    if cfg.variant == "bsc":
        p = channel if not isinstance(channel, DMC) else _bsc_parameter(channel)
        return bsc_simulate(float(p), cfg, R, x, rng)
    dmc = channel if isinstance(channel, DMC) else bsc(float(channel))
    return dmc_simulate(dmc, cfg, R, x, rng)


def receive(payload: str, channel: "float | DMC", cfg: ProtocolConfig, R: SharedRandomness) -> tuple[int, ...]:
    """Décodeur du récepteur : ne lit que la charge utile et l'aléa partagé."""
    n = cfg.n
    if cfg.variant == "bsc":
        p = channel if not isinstance(channel, DMC) else _bsc_parameter(channel)
        size = _bsc_size(float(p), cfg)
        flag, body = payload[:1], payload[1:]
        if flag == "1":
            return _unpack_letters(int(body or "0", 2), 2, n)
        i = int(body or "0", 2)
        return _unpack_letters(int(_bsc_chunk(R, n, i // Z_CHUNK)[i % Z_CHUNK]), 2, n)

    dmc = channel if isinstance(channel, DMC) else bsc(float(channel))
    itc_bits = _width(count_types(n, dmc.d_in))
    k = int(payload[:itc_bits] or "0", 2)
    flag, body = payload[itc_bits : itc_bits + 1], payload[itc_bits + 1 :]
    if flag == "1":
        return _unpack_letters(int(body or "0", 2), dmc.d_out, n)
    tc = type_from_index(n, dmc.d_in, k)
    i = int(body or "0", 2)
    _, ys = _dmc_chunk(dmc, tc, R, k, i // Z_CHUNK)
    return tuple(int(v) for v in ys[i % Z_CHUNK])


# ---------------------------------------------------------------------------
# Oracle exact
# ---------------------------------------------------------------------------

def _product_matrix(matrix: np.ndarray, n: int) -> np.ndarray:
    result = np.ones((1, 1))
    for _ in range(n):
        result = np.kron(result, matrix)
    return result


def _element_distribution(dmc: DMC, tc: TypeClass, nn: np.ndarray) -> np.ndarray:
    """Loi d'un élément de Z(R, n, k) : moyenne de N^n(.|x') sur le type."""
    rows = [
        _pack_letters(xs, dmc.d_in)
        for xs in product(range(dmc.d_in), repeat=tc.n)
        if type_of(xs, dmc.d_in).counts == tc.counts
    ]
    return nn[rows].mean(axis=0)


def induced_matrix(channel: "float | DMC", cfg: ProtocolConfig) -> np.ndarray:
    """
    Matrice S_n induite par le protocole, par énumération de tous les
    multi-ensembles Z, de toutes les sorties provisoires et de tous les
    choix uniformes.
    """
    dmc = channel if isinstance(channel, DMC) else bsc(float(channel))
    bsc_variant = cfg.variant == "bsc"
    p = _bsc_parameter(dmc) if bsc_variant else None
    n = cfg.n
    outputs = list(product(range(dmc.d_out), repeat=n))
    inputs = list(product(range(dmc.d_in), repeat=n))
    nn = _product_matrix(dmc.array, n)

    induced = np.zeros_like(nn)
    for xi, xs in enumerate(inputs):
        if bsc_variant:
            size = _bsc_size(p, cfg)
            element = np.full(len(outputs), 1.0 / len(outputs))
            keys = [sum(a != b for a, b in zip(xs, ys)) for ys in outputs]
        else:
            tc = type_of(xs, dmc.d_in)
            size = _dmc_size(dmc, cfg, tc)
            element = _element_distribution(dmc, tc, nn)
            keys = [joint_type(xs, ys, dmc.d_in, dmc.d_out).key() for ys in outputs]

        work = int(comb(len(outputs) + size - 1, size, exact=True)) * len(outputs) * len(inputs)
        if work > ORACLE_MAX_COMBINATIONS:
            raise CombinatorialLimitError(f"{work} combinaisons à énumérer (limite {ORACLE_MAX_COMBINATIONS})")

        groups: dict = {}
        for yi, key in enumerate(keys):
            groups.setdefault(key, []).append(yi)

        norm = factorial(size)
        for multiset in combinations_with_replacement(range(len(outputs)), size):
            mult = Counter(multiset)
            weight = norm * np.prod([element[v] ** m / factorial(m) for v, m in mult.items()])
            if weight == 0:
                continue
            for key, members in groups.items():
                mass = nn[xi, members].sum()
                if mass == 0:
                    continue
                matches = {v: m for v, m in mult.items() if keys[v] == key}
                total = sum(matches.values())
                if total:
                    for v, m in matches.items():
                        induced[xi, v] += weight * mass * m / total
                else:
                    induced[xi, members] += weight * nn[xi, members]
    return induced


def exact_faithfulness_oracle(channel: "float | DMC", cfg: ProtocolConfig) -> float:
    """max |S_n - N^n| ; doit rester sous 1e-12."""
    dmc = channel if isinstance(channel, DMC) else bsc(float(channel))
    deviation = float(np.max(np.abs(induced_matrix(channel, cfg) - _product_matrix(dmc.array, cfg.n))))
    logger.info("Oracle exact n=%d: écart max %.3e", cfg.n, deviation)
    return deviation


# ---------------------------------------------------------------------------
# Monte-Carlo
# ---------------------------------------------------------------------------

class FaithfulnessReport(BaseModel):
    tv_estimate: float = Field(ge=0.0)
    chi2_pvalue: float = Field(ge=0.0, le=1.0)
    trials: int
    bins: int
    x: tuple[int, ...]


class CostStatistics(BaseModel):
    trials: int
    n: int
    eps: float
    capacity: float
    threshold_bits: float
    mean_bits_per_symbol: float
    se_mean_bits_per_symbol: float
    p_exceed: float
    se_p_exceed: float
    fallback_rate: float
    se_fallback_rate: float
    mean_itc_bits_per_symbol: float


class BscCostModel(BaseModel):
    n: int
    eps: float
    capacity: float
    z_size: int
    index_bits: int
    threshold_bits: float
    fallback_probability: float
    p_exceed: float
    mean_bits_per_symbol: float


def _run_trial(channel, cfg: ProtocolConfig, seed: int, t: int, source: Callable) -> dict:
    R = SharedRandomness(seed=seed).trial(t)
    x = source(np.random.default_rng([seed, t, 2]))
    output, tr = simulate(channel, cfg, R, x, rng=np.random.default_rng([seed, t, 1]))
    return {
        "output": output,
        "bits_sent": tr.bits_sent,
        "fallback": tr.fallback,
        "itc_bits": tr.itc_bits,
    }


def _run_trials(channel, cfg: ProtocolConfig, trials: int, seed: int, source: Callable) -> pd.DataFrame:
    jobs = get_settings().threads
    rows = Parallel(n_jobs=jobs)(
        delayed(_run_trial)(channel, cfg, seed, t, source) for t in range(trials)
    )
    return pd.DataFrame(rows)


def _d_in(channel) -> int:
    return channel.d_in if isinstance(channel, DMC) else 2


def parse_source(text: str, channel, n: int) -> Callable[[np.random.Generator], tuple[int, ...]]:
    """'fixed:0101', 'iid:0.3,0.7' ou 'itc-uniform'."""
    d_in = _d_in(channel)
    kind, _, arg = text.partition(":")
    if kind == "fixed":
        x = as_letters(arg, d_in)
        if len(x) != n:
            raise InvalidParameterError(f"L'entrée fixe doit compter n={n} lettres (reçu: {arg})")
        return _FixedSource(x)
    if kind == "iid":
        q = _check_distribution([float(v) for v in arg.split(",")], d_in)
        return _IidSource(q, n)
    if kind == "itc-uniform":
        return _ItcSource(n, d_in)
    raise InvalidParameterError(f"Source inconnue: {text}. Valeurs acceptées: fixed:x, iid:q, itc-uniform")


class _FixedSource:
    def __init__(self, x):
        self.x = tuple(x)

    def __call__(self, rng):
        return self.x


class _IidSource:
    def __init__(self, q, n):
        self.q, self.n = q, n

    def __call__(self, rng):
        return tuple(int(v) for v in rng.choice(len(self.q), size=self.n, p=self.q))


class _ItcSource:
    def __init__(self, n, d):
        self.n, self.d = n, d
        self.count = count_types(n, d)

    def __call__(self, rng):
        tc = type_from_index(self.n, self.d, int(rng.integers(self.count)))
        return sample_from_type(tc, rng)


def _capacity(channel, cfg: ProtocolConfig) -> float:
    if cfg.variant == "bsc":
        p = channel if not isinstance(channel, DMC) else _bsc_parameter(channel)
        return 1.0 - binary_entropy(float(p))
    dmc = channel if isinstance(channel, DMC) else bsc(float(channel))
    return ba_capacity(dmc)[0]


def empirical_faithfulness(
    channel: "float | DMC",
    cfg: ProtocolConfig,
    trials: int,
    seed: int,
    x=None,
) -> FaithfulnessReport:
    """Histogramme des sorties pour une entrée fixe contre N^n(.|x)."""
    dmc = channel if isinstance(channel, DMC) else bsc(float(channel))
    n = cfg.n
    if trials < 1000:
        raise InvalidParameterError(f"Au moins 1000 essais sont requis (reçu: {trials})")
    bins = dmc.d_out**n
    if bins > MAX_HISTOGRAM_BINS:
        raise CombinatorialLimitError(f"{bins} cases d'histogramme (limite {MAX_HISTOGRAM_BINS})")
    x = as_letters(x, dmc.d_in) if x is not None else tuple(i % dmc.d_in for i in range(n))

    frame = _run_trials(channel, cfg, trials, seed, _FixedSource(x))
    codes = frame["output"].map(lambda ys: _pack_letters(ys, dmc.d_out))
    observed = np.bincount(codes.to_numpy(dtype=int), minlength=bins).astype(float)

    row = np.ones(1)
    for letter in x:
        row = np.kron(row, dmc.array[letter])
    expected = row * trials

    tv = 0.5 * float(np.abs(observed / trials - row).sum())
    pvalue = _pooled_chi2(observed, expected)
    logger.info("Fidélité empirique n=%d: TV=%.4f p=%.4f", n, tv, pvalue)
    return FaithfulnessReport(tv_estimate=tv, chi2_pvalue=pvalue, trials=trials, bins=bins, x=x)


def _pooled_chi2(observed: np.ndarray, expected: np.ndarray) -> float:
    """Khi-deux, cases d'espérance < 5 regroupées."""
    if np.any(observed[expected == 0] > 0):
        return 0.0
    keep = expected >= 5
    obs = list(observed[keep])
    exp = list(expected[keep])
    small = (~keep) & (expected > 0)
    if small.any():
        obs.append(observed[small].sum())
        exp.append(expected[small].sum())
    if len(obs) < 2:
        return 1.0
    exp = np.asarray(exp)
    exp *= np.sum(obs) / exp.sum()
    return float(chisquare(np.asarray(obs), exp).pvalue)


def cost_statistics(
    channel: "float | DMC",
    cfg: ProtocolConfig,
    trials: int,
    source: str = "itc-uniform",
    seed: int = 0,
) -> CostStatistics:
    """Coût moyen, P(m_n > n(C+eps)) et taux de repli, avec erreurs-types."""
    if trials < 2:
        raise InvalidParameterError(f"Au moins 2 essais sont requis (reçu: {trials})")
    capacity = _capacity(channel, cfg)
    threshold = cfg.n * (capacity + cfg.eps)
    frame = _run_trials(channel, cfg, trials, seed, parse_source(source, channel, cfg.n))
    frame["per_symbol"] = frame["bits_sent"] / cfg.n
    frame["exceed"] = (frame["bits_sent"] > threshold).astype(float)
    frame["fallback"] = frame["fallback"].astype(float)
    stats = CostStatistics(
        trials=trials,
        n=cfg.n,
        eps=cfg.eps,
        capacity=capacity,
        threshold_bits=threshold,
        mean_bits_per_symbol=float(frame["per_symbol"].mean()),
        se_mean_bits_per_symbol=float(frame["per_symbol"].sem()),
        p_exceed=float(frame["exceed"].mean()),
        se_p_exceed=float(frame["exceed"].sem()),
        fallback_rate=float(frame["fallback"].mean()),
        se_fallback_rate=float(frame["fallback"].sem()),
        mean_itc_bits_per_symbol=float(frame["itc_bits"].mean()) / cfg.n,
    )
    logger.info("Coût n=%d: %.4f bits/symbole, repli %.3f", cfg.n, stats.mean_bits_per_symbol, stats.fallback_rate)
    return stats


def bsc_fallback_probability(p: float, n: int, eps: float, size: Optional[int] = None) -> BscCostModel:
    """
    Probabilité exacte de repli du protocole BSC :
    sum_d P(d) (1 - C(n,d)/2^n)^{|Z|}, et le coût attendu correspondant.
    """
    capacity = 1.0 - binary_entropy(p)
    size = size or z_size(capacity, n, eps)
    distances = np.arange(n + 1)
    shell = np.array([comb(n, d, exact=True) / 2**n for d in distances], dtype=float)
    miss = np.array([np.exp(size * log1p(-s)) if s < 1 else 0.0 for s in shell])
    fallback = float(binom.pmf(distances, n, p) @ miss)

    index_bits, raw_bits = _width(size), n
    threshold = n * (capacity + eps)
    success_cost, fallback_cost = 1 + index_bits, 1 + raw_bits
    p_exceed = (1 - fallback) * (success_cost > threshold) + fallback * (fallback_cost > threshold)
    mean = ((1 - fallback) * success_cost + fallback * fallback_cost) / n
    return BscCostModel(
        n=n,
        eps=eps,
        capacity=capacity,
        z_size=size,
        index_bits=index_bits,
        threshold_bits=threshold,
        fallback_probability=fallback,
        p_exceed=float(p_exceed),
        mean_bits_per_symbol=float(mean),
    )
