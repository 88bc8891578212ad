"""
Gerarchia delle eccezioni di constrex
"""


class ConstrexError(Exception):
    """Errore base; exit_code è il codice d'uscita usato dalla CLI"""

    exit_code = 3


class InputError(ConstrexError, ValueError):
    """Input non valido (forme, intervalli, file di configurazione)"""

    exit_code = 2


class NumericalError(ConstrexError, ArithmeticError):
    """Fallimento numerico (singolarità, fattorizzazioni, radici)"""

    exit_code = 3


class DimensionMismatch(InputError):
    pass


class QNotLessThanP(InputError):
    pass


class NTooSmall(InputError):
    pass


class TooLarge(InputError):
    pass


class InvalidBounds(InputError):
    pass


class NegativeVariance(InputError):
    pass


class LevelOutOfRange(InputError):
    pass


class RatioOutOfRange(InputError):
    pass


class ProbabilityOutOfRange(InputError):
    pass


class NonFiniteInput(InputError):
    pass


class ConfigInvalid(InputError):
    pass


class ParseError(InputError):
    pass


class RankDeficient(NumericalError):
    pass


class SingularGram(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class NoRoot(NumericalError):
    pass
