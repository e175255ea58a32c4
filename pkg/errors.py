class QcapError(ValueError):
    """Erreur de base de la bibliothèque."""


class InvalidStateError(QcapError):
    pass


class DimensionMismatchError(QcapError):
    pass


class InvalidChannelError(QcapError):
    pass


class InvalidParameterError(QcapError):
    pass


class DimensionLimitError(QcapError):
    pass


class CombinatorialLimitError(QcapError):
    pass


class ConvergenceError(QcapError):
    """Non-convergence; `best` contient le meilleur résultat obtenu."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class OptimizationCancelled(QcapError):
    """Arrêt demandé par le callback de progression."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
