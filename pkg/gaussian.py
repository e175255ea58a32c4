"""
Formules fermées du canal gaussien bosonique à un mode : entropie
thermique g, C_E, capacité de Shannon, bornes par états cohérents et
comprimés, C_H conjecturée et tables de balayage pour les figures.
"""
import logging
from itertools import product

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.special import xlog1py

from errors import InvalidParameterError
from qmath import LN2

logger = logging.getLogger(__name__)

CLAMP_TOL = 1e-9

COLUMNS = ["S", "N", "k", "ce", "cshan", "ratio", "lb_coh", "ub_coh", "lb_sq", "ub_sq", "ch_conj", "limit"]


class GaussianParams(BaseModel):
    """S : énergie moyenne du signal ; N : bruit ; k : atténuation (< 1) ou amplification (> 1)."""

    S: float = Field(ge=0.0)
    N: float = Field(ge=0.0)
    k: float = Field(default=1.0, gt=0.0)


def g_entropy(S: float) -> float:
    """g(S) = (S+1) log2(S+1) - S log2 S."""
    if S < 0:
        raise InvalidParameterError(f"S doit être >= 0 (reçu: {S})")
    if S == 0:
        return 0.0
    # forme log1p, sans annulation quand S est grand
    return float((np.log1p(S) + xlog1py(S, 1.0 / S)) / LN2)


def _g_clamped(arg: float, scale: float) -> float:
    if arg < -CLAMP_TOL * max(1.0, scale):
        raise InvalidParameterError(f"Argument négatif pour g: {arg}")
    return g_entropy(max(arg, 0.0))


def shannon_capacity(S: float, N: float) -> float:
    """log2(1 + S/N)."""
    if N <= 0:
        raise InvalidParameterError(f"N doit être > 0, la capacité serait infinie (reçu: {N})")
    if S < 0:
        raise InvalidParameterError(f"S doit être >= 0 (reçu: {S})")
    return float(np.log1p(S / N) / LN2)


def gaussian_shannon(params: GaussianParams) -> float:
    """
    Capacité du canal classique comparable : signal reçu k^2 S, bruit
    thermique de sortie S' - k^2 S (N si k <= 1, N + k^2 - 1 si k >= 1).
    """
    return shannon_capacity(params.k**2 * params.S, output_noise(params))


def output_energy(params: GaussianParams) -> float:
    return params.k**2 * params.S + output_noise(params)


def output_noise(params: GaussianParams) -> float:
    """S' - k^2 S : N si k <= 1, N + k^2 - 1 si k >= 1."""
    if params.k <= 1:
        return params.N
    return params.N + params.k**2 - 1


def big_d(S: float, S_out: float, k: float) -> float:
    """D = sqrt((S + S' + 1)^2 - 4 k^2 S (S+1))."""
    radicand = (S + S_out + 1) ** 2 - 4 * k**2 * S * (S + 1)
    if radicand < -CLAMP_TOL * max(1.0, (S + S_out + 1) ** 2):
        raise InvalidParameterError(f"Radicande négatif pour D: {radicand}")
    return float(np.sqrt(max(radicand, 0.0)))


def gaussian_ce(params: GaussianParams) -> float:
    """
    C_E = g(S) + g(S') - g((D + S' - S - 1)/2) - g((D - S' + S - 1)/2).

    Avec T = S + S' + 1 et D = T - h, h = 4 k^2 S (S+1) / (D + T), les deux
    arguments valent S' - h/2 et S - h/2 ; cette écriture reste exacte
    quand h est petit devant T (bruit fort).
    """
    S, k = params.S, params.k
    S_out = output_energy(params)
    total = S + S_out + 1
    shortfall = 4 * k**2 * S * (S + 1) / (big_d(S, S_out, k) + total)
    value = (
        g_entropy(S)
        - _g_clamped(S - shortfall / 2, total)
        + g_entropy(S_out)
        - _g_clamped(S_out - shortfall / 2, total)
    )
    return max(float(value), 0.0)


def ce_over_cshan_limit(S: float) -> float:
    """Limite N -> infini de C_E / C_Shan : (S+1) ln(1 + 1/S), indépendante de k."""
    if S <= 0:
        raise InvalidParameterError(f"S doit être > 0 (reçu: {S})")
    return float((S + 1) * np.log1p(1 / S))


def _log_ratio(num: float, den: float) -> float:
    if den <= 0:
        return float("inf")
    return float(np.log1p(num / den) / LN2)


def coherent_bounds(params: GaussianParams) -> tuple[float, float]:
    """
    Bornes par états cohérents (téléportation / codage superdense sans
    compression). Borne supérieure infinie si son dénominateur est <= 0.
    """
    S, N, k = params.S, params.N, params.k
    k2 = k**2
    if k <= 1:
        lower = _log_ratio(k2 * S, N + 1)
        upper = _log_ratio(k2 * (S + 1), N - k2)
    else:
        lower = _log_ratio(k2 * S, N + k2)
        upper = _log_ratio(k2 * (S + 1), N - 1)
    return lower, upper


def squeezed_upper_at(S: float, N: float, r: float) -> float:
    return _log_ratio(S + np.cosh(r) ** 2, N - np.exp(-2 * r))


def squeezed_lower_at(S: float, N: float, r: float) -> float:
    return _log_ratio(S - np.sinh(r) ** 2, N + np.exp(-2 * r))


def squeezed_bounds(S: float, N: float) -> tuple[float, float, float, float]:
    """
    Bornes par états comprimés (k = 1) aux compressions optimales
    e^{2r} = (D1 + 1)/N (haute) et (D1 - 1)/N (basse), D1 = sqrt((N+1)^2 + 4NS).
    Retourne (basse, haute, r_basse, r_haute).
    """
    if S < 0 or N <= 0:
        raise InvalidParameterError(f"S >= 0 et N > 0 requis (reçu: S={S}, N={N})")
    d1 = np.sqrt((N + 1) ** 2 + 4 * N * S)
    r_upper = 0.5 * np.log((d1 + 1) / N)
    r_lower = 0.5 * np.log((d1 - 1) / N)
    # la compression ne peut pas dépasser l'énergie disponible
    r_lower = float(min(r_lower, np.arcsinh(np.sqrt(S))))
    return squeezed_lower_at(S, N, r_lower), squeezed_upper_at(S, N, r_upper), r_lower, float(r_upper)


def ch_conjectured(params: GaussianParams) -> float:
    """chi de l'ensemble thermique d'états cohérents : g(S') - g(S' - k^2 S)."""
    S_out = output_energy(params)
    return max(g_entropy(S_out) - _g_clamped(output_noise(params), S_out), 0.0)


class GaussianGrid(BaseModel):
    S: list[float]
    N: list[float]
    k: list[float] = Field(default_factory=lambda: [1.0])


def figure_grids() -> dict[str, GaussianGrid]:
    """Grilles des trois figures : rapport vs bruit, rapport vs signal, trois courbes."""
    return {
        "ratio-vs-noise": GaussianGrid(
            S=[0.1, 1.0, 10.0], N=np.logspace(-2, 4, 25).tolist(), k=[0.1, 1.0, 3.0]
        ),
        "ratio-vs-signal": GaussianGrid(
            S=np.logspace(-3, 3, 25).tolist(), N=[0.1, 0.3, 1.0, 3.0, 10.0], k=[1.0]
        ),
        "three-curves": GaussianGrid(S=np.logspace(-4, 1, 26).tolist(), N=[1.0], k=[1.0]),
    }


def _row(S: float, N: float, k: float) -> dict:
    params = GaussianParams(S=S, N=N, k=k)
    ce = gaussian_ce(params)
    cshan = gaussian_shannon(params) if output_noise(params) > 0 else float("inf")
    lb_coh, ub_coh = coherent_bounds(params)
    if k == 1 and N > 0:
        lb_sq, ub_sq, _, _ = squeezed_bounds(S, N)
    else:
        lb_sq = ub_sq = np.nan
    return {
        "S": S,
        "N": N,
        "k": k,
        "ce": ce,
        "cshan": cshan,
        "ratio": ce / cshan if 0 < cshan < np.inf else np.nan,
        "lb_coh": lb_coh,
        "ub_coh": ub_coh,
        "lb_sq": lb_sq,
        "ub_sq": ub_sq,
        "ch_conj": ch_conjectured(params),
        "limit": ce_over_cshan_limit(S) if S > 0 else np.inf,
    }


def sweep(grid: GaussianGrid) -> pd.DataFrame:
    """Une ligne par (k, S, N), dans cet ordre d'imbrication."""
    rows = [_row(S, N, k) for k, S, N in product(grid.k, grid.S, grid.N)]
    logger.debug("Balayage gaussien: %d lignes", len(rows))
    return pd.DataFrame(rows, columns=COLUMNS)
