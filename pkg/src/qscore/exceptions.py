"""Exception hierarchy shared by every qscore module."""


class QScoreError(Exception):
    """Base class for library errors."""


class ValidationError(QScoreError, ValueError):
    """Input failed a structural check (Hermiticity, positivity, trace, shape)."""


class DomainError(QScoreError, ValueError):
    """A spectrum falls outside the domain of a scalar function."""


class SingularityError(QScoreError, ArithmeticError):
    """A quantity is undefined because an operator or matrix is singular."""
