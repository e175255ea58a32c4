import logging
import os
import sys
from functools import lru_cache

from pydantic import BaseModel, Field, field_validator


# Tolérances numériques (flottants 64 bits, d <= 64)
EIG_ZERO_TOL = 1e-12      # valeurs propres ignorées dans l'entropie
STATE_TOL = 1e-10         # hermiticité / trace / positivité d'un état
KRAUS_TOL = 1e-9          # complétude sum A_k^dag A_k = I
IDENTITY_TOL = 1e-8       # identités vérifiées (échange d'entropie, SSA...)

# Optimiseur de C_E (Frank-Wolfe)
MAX_ITERS = 100_000
DEFAULT_CE_TOL = 1e-7
LINE_SEARCH_XATOL = 1e-12
AD_XATOL = 1e-10
MAX_OPTIMIZER_DIM = 16

# Blahut-Arimoto
BA_MAX_ITERS = 1_000_000
DEFAULT_BA_TOL = 1e-12

# Protocole de Shannon inverse
Z_CHUNK = 4096            # taille des blocs de Z régénérés à la demande
ORACLE_MAX_COMBINATIONS = 10**7
MAX_TYPE_COUNT = 10**7

# Sorties
CSV_FLOAT_FORMAT = "%.10g"
SIG_DIGITS = 10


class Settings(BaseModel):
    """Réglages lus dans l'environnement (QCAP_THREADS, QCAP_LOG_LEVEL)."""

    threads: int = Field(default=1, ge=1)
    log_level: str = "WARNING"

    @field_validator("log_level")
    @classmethod
    def check_level(cls, value: str) -> str:
        value = value.upper()
        if not isinstance(logging.getLevelName(value), int):
            raise ValueError(f"Niveau de log inconnu: {value}")
        return value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings(
        threads=os.environ.get("QCAP_THREADS", "1"),
        log_level=os.environ.get("QCAP_LOG_LEVEL", "WARNING"),
    )


def configure_logging(level: str | None = None) -> None:
    """Envoie les logs sur stderr (stdout reste réservé aux résultats)."""
    logging.basicConfig(
        stream=sys.stderr,
        level=(level or get_settings().log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
