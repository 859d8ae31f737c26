"""Shared types and validation for aligned forecast/return series."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Union

import numpy as np

__all__ = [
    "EncompassingError",
    "DataError",
    "NumericError",
    "LengthMismatch",
    "NonFinite",
    "NonNegativeES",
    "QuantileBelowES",
    "CollinearForecasts",
    "DomainError",
    "DimensionMismatch",
    "ProbLevel",
    "ForecastSet",
    "make_forecast_set",
    "COLLINEARITY_TOL",
]

COLLINEARITY_TOL = 1e-10


class EncompassingError(Exception):
    """Base class for all package errors."""


class DataError(EncompassingError, ValueError):
    """Input data violates a contract (maps to CLI exit code 2)."""


class NumericError(EncompassingError, ArithmeticError):
    """Numerical failure during estimation or inference (exit code 3)."""


class LengthMismatch(DataError):
    pass


class NonFinite(DataError):
    pass


class NonNegativeES(DataError):
    pass


class QuantileBelowES(DataError):
    pass


class CollinearForecasts(DataError):
    pass


class DomainError(DataError):
    """Argument outside the domain of a loss or identification function."""


class DimensionMismatch(DataError):
    pass


@dataclass(frozen=True)
class ProbLevel:
    """Probability level of the tail functionals, strictly inside (0, 1)."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 1.0) or not np.isfinite(a):
            raise DataError(f"probability level must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    def __float__(self) -> float:
        return self.alpha


def _as_alpha(alpha: Union[float, ProbLevel]) -> float:
    if isinstance(alpha, ProbLevel):
        return alpha.alpha
    return ProbLevel(alpha).alpha


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


def _rank_deficient(a: np.ndarray, b: np.ndarray, tol: float = COLLINEARITY_TOL) -> bool:
    # Centered [a, b]; an all-zero matrix (two constant series) is not flagged.
    m = np.column_stack([a - a.mean(), b - b.mean()])
    s = np.linalg.svd(m, compute_uv=False)
    return bool(s[-1] < tol * s[0])


@dataclass(frozen=True, eq=False)
class ForecastSet:
    """Aligned realizations and the two competitors' VaR/ES forecasts.

    ``y[i]`` is the realization that ``q1[i], e1[i], q2[i], e2[i]`` were
    issued for. The VaR series are optional; without them only the strict
    ES test applies. Instances are immutable (arrays are read-only).
    """

    y: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    alpha: float
    q1: Optional[np.ndarray] = None
    q2: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def has_quantiles(self) -> bool:
        return self.q1 is not None

    def swapped(self) -> "ForecastSet":
        """Exchange the roles of the two forecasters."""
        return ForecastSet(y=self.y, e1=self.e2, e2=self.e1, alpha=self.alpha,
                           q1=self.q2, q2=self.q1)

    def scaled(self, c: float) -> "ForecastSet":
        """Multiply realizations and all forecasts by ``c > 0``."""
        if not c > 0:
            raise DataError("scale factor must be positive")
        return make_forecast_set(
            self.y * c, self.e1 * c, self.e2 * c, self.alpha,
            q1=None if self.q1 is None else self.q1 * c,
            q2=None if self.q2 is None else self.q2 * c,
        )

    def __eq__(self, other):
        if not isinstance(other, ForecastSet):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


def make_forecast_set(y, e1, e2, alpha=0.025, q1=None, q2=None) -> ForecastSet:
    """Validate and freeze a set of aligned series.

    Parameters
    ----------
    y : array-like
        Realizations, length n >= 1.
    e1, e2 : array-like
        ES forecasts; must be strictly negative.
    alpha : float or ProbLevel
        Probability level.
    q1, q2 : array-like, optional
        VaR forecasts. Either both or neither must be given; when present
        ``q_i >= e_i`` must hold at every observation.

    Raises
    ------
    LengthMismatch, NonFinite, NonNegativeES, QuantileBelowES,
    CollinearForecasts
    """
    a = _as_alpha(alpha)
    if (q1 is None) != (q2 is None):
        raise LengthMismatch("VaR forecasts must be given for both forecasters or neither")

    named = {"y": y, "e1": e1, "e2": e2}
    if q1 is not None:
        named.update(q1=q1, q2=q2)
    arrs = {k: _frozen(v) for k, v in named.items()}

    n = arrs["y"].shape[0]
    if n < 1:
        raise LengthMismatch("series must contain at least one observation")
    for k, v in arrs.items():
        if v.shape[0] != n:
            raise LengthMismatch(f"series {k} has length {v.shape[0]}, expected {n}")
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise NonFinite(f"series {k} has a non-finite value at row {bad[0]}")
    for k in ("e1", "e2"):
        bad = np.flatnonzero(arrs[k] >= 0)
        if bad.size:
            raise NonNegativeES(f"ES forecast {k} must be strictly negative; row {bad[0]} is {arrs[k][bad[0]]!r}")
    if q1 is not None:
        for i in ("1", "2"):
            bad = np.flatnonzero(arrs["q" + i] < arrs["e" + i])
            if bad.size:
                raise QuantileBelowES(f"q{i} < e{i} at row {bad[0]}")

    if np.array_equal(arrs["e1"], arrs["e2"]) or _rank_deficient(arrs["e1"], arrs["e2"]):
        raise CollinearForecasts("ES forecasts e1 and e2 are perfectly collinear")
    if q1 is not None and (np.array_equal(arrs["q1"], arrs["q2"]) or _rank_deficient(arrs["q1"], arrs["q2"])):
        raise CollinearForecasts("VaR forecasts q1 and q2 are perfectly collinear")

    return ForecastSet(y=arrs["y"], e1=arrs["e1"], e2=arrs["e2"], alpha=a,
                       q1=arrs.get("q1"), q2=arrs.get("q2"))
