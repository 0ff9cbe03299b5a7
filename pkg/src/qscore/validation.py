"""Input checks shared by the estimator classes and the CLI."""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError
from .hermitian import HermitianMatrix, as_hermitian
from .scoring import Generator, get_generator
from .states import DensityOperator, make_density


def check_density(m) -> DensityOperator:
    return make_density(m)


def check_hermitian(m) -> HermitianMatrix:
    return as_hermitian(m)


def check_generator(g) -> Generator:
    return get_generator(g)


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_outcomes(x, n_outcomes: int, n_settings: int = 1) -> np.ndarray:
    """Validate a record of measurement outcomes.

    With one setting ``x`` is a 1-D array of outcome indices. With several
    it is an ``(n, 2)`` array of ``(setting, outcome)`` rows.
    """
    a = np.asarray(x)
    if a.size == 0:
        raise ValidationError("no outcomes given")
    if not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise ValidationError("outcomes must be integer indices")
        a = a.astype(np.int64)
    if n_settings == 1:
        a = a.reshape(-1)
        cols = [(a, n_outcomes, "outcome")]
    else:
        if a.ndim != 2 or a.shape[1] != 2:
            raise ValidationError(f"expected (n, 2) rows of (setting, outcome), got shape {a.shape}")
        cols = [(a[:, 0], n_settings, "setting"), (a[:, 1], n_outcomes, "outcome")]
    for col, hi, name in cols:
        if col.min() < 0 or col.max() >= hi:
            raise ValidationError(f"{name} index out of range [0, {hi})")
    return a
