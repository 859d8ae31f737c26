"""Wald-type encompassing tests for ES (strict, auxiliary), joint VaR/ES and VaR.

Restrictions are applied to the unrestricted estimate. With the default
linear links ``g = b1 + b2 f1 + b3 f2`` the hypotheses are:

=========  ===================================  ===================================
variant    H01: forecast 1 encompasses 2        H02: forecast 2 encompasses 1
=========  ===================================  ===================================
joint      (b2, b3, e2, e3) = (1, 0, 1, 0)      (b2, b3, e2, e3) = (0, 1, 0, 1)
aux/strict (e2, e3) = (1, 0)                    (e2, e3) = (0, 1)
VaR        (b2, b3) = (1, 0)                    (b2, b3) = (0, 1)
=========  ===================================  ===================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
from scipy.special import gammaincc

from .core import DataError, EncompassingError, ForecastSet, NumericError
from .links import LinkSpec
from .mestim import (JOINT_OR_AUX, STRICT, EstimationResult, EstimatorOptions, Theta,
                     estimate, estimate_quantile)
from .vcov import SandwichCov, VcovOptions, quantile_sandwich, sandwich

__all__ = [
    "JOINT",
    "AUX",
    "STRICT_ES",
    "VAR",
    "VARIANTS",
    "NR", "E1", "E2", "C",
    "SingularOmega",
    "Restriction",
    "TestOptions",
    "TestReport",
    "Decision",
    "restriction_for",
    "wald",
    "chi2_sf",
    "run_test",
    "var_test",
    "run_tests",
    "decide",
    "parse_variant",
]

JOINT = "JointVaRES"
AUX = "AuxES"
STRICT_ES = "StrictES"
VAR = "VaR"
VARIANTS = (STRICT_ES, AUX, JOINT, VAR)

NR, E1, E2, C = "NR", "E1", "E2", "C"


class SingularOmega(NumericError):
    pass


@dataclass(frozen=True)
class Restriction:
    """Positions in the stacked parameter vector and their null values."""

    indices: Tuple[int, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        vals = tuple(float(v) for v in self.values)
        if len(idx) != len(vals) or len(idx) == 0:
            raise ValueError("restriction needs matching, non-empty indices and values")
        if len(set(idx)) != len(idx) or min(idx) < 0:
            raise ValueError("restriction indices must be distinct and non-negative")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @property
    def df(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class TestOptions:
    __test__ = False  # keep pytest from collecting it

    spec_q: LinkSpec = field(default_factory=LinkSpec)
    spec_e: LinkSpec = field(default_factory=LinkSpec)
    estimator: EstimatorOptions = field(default_factory=EstimatorOptions)
    vcov: VcovOptions = field(default_factory=VcovOptions)
    restrict_intercepts: bool = False


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    variant: str
    direction: int
    statistic: float
    df: int
    p_value: float
    theta_hat: Theta
    restriction: Restriction
    n: int
    estimation: Optional[EstimationResult] = None
    covariance: Optional[SandwichCov] = None


@dataclass(frozen=True)
class Decision:
    outcome: str
    level: float
    combined_weights: Optional[Theta] = None


def parse_variant(text: str) -> str:
    t = text.strip().lower().replace("_", "").replace("-", "")
    table = {
        "joint": JOINT, "jointvares": JOINT, "vares": JOINT,
        "aux": AUX, "auxes": AUX, "auxiliary": AUX,
        "strict": STRICT_ES, "strictes": STRICT_ES, "str": STRICT_ES,
        "var": VAR,
    }
    if t not in table:
        raise ValueError(f"unknown test variant {text!r}")
    return table[t]


def _block_restriction(spec: LinkSpec, direction: int, offset: int, with_intercept: bool):
    null = spec.null_value(direction)
    if null is None:
        return None
    pos = [i for i in range(spec.k) if with_intercept or i != spec.intercept_index]
    return [offset + i for i in pos], [null[i] for i in pos]


def restriction_for(variant: str, direction: int, spec_q: LinkSpec, spec_e: LinkSpec,
                    restrict_intercepts: bool = False) -> Optional[Restriction]:
    """Null restriction for a variant and direction, or None if the links cannot express it."""
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    blocks = []
    if variant in (JOINT, VAR):
        blocks.append(_block_restriction(spec_q, direction, 0, restrict_intercepts))
    if variant in (JOINT, AUX, STRICT_ES):
        blocks.append(_block_restriction(spec_e, direction, spec_q.k, restrict_intercepts))
    if not blocks:
        raise ValueError(f"unknown test variant {variant!r}")
    if any(b is None for b in blocks):
        return None
    idx = [i for b in blocks for i in b[0]]
    vals = [v for b in blocks for v in b[1]]
    if not idx:
        raise ValueError("restriction is empty; enable restrict_intercepts for this link")
    return Restriction(tuple(idx), tuple(vals))


def chi2_sf(stat: float, df: int) -> float:
    """Upper tail of the chi-square distribution via the regularized incomplete gamma."""
    return float(gammaincc(0.5 * df, 0.5 * max(float(stat), 0.0)))


def wald(theta_hat, omega_hat, restriction: Restriction, n: int) -> Tuple[float, int]:
    """``n (theta_R - r)' [Omega_RR]^{-1} (theta_R - r)`` and its degrees of freedom."""
    v = theta_hat.vector() if isinstance(theta_hat, Theta) else np.asarray(theta_hat, dtype=float)
    idx = np.array(restriction.indices)
    if idx.max() >= v.shape[0]:
        raise ValueError("restriction index outside the parameter vector")
    d = v[idx] - np.array(restriction.values)
    if not np.any(d):
        return 0.0, restriction.df
    om = np.asarray(omega_hat, dtype=float)[np.ix_(idx, idx)]
    if not np.all(np.isfinite(om)) or np.linalg.cond(om) > 1e12:
        raise SingularOmega("restricted covariance block is singular")
    stat = float(n * d @ np.linalg.solve(om, d))
    return max(stat, 0.0), restriction.df


def _report(variant, direction, est, cov, restriction, n):
    stat, df = wald(est.theta_hat, cov.omega_hat, restriction, n)
    return TestReport(variant=variant, direction=direction, statistic=stat, df=df,
                      p_value=chi2_sf(stat, df), theta_hat=est.theta_hat,
                      restriction=restriction, n=n, estimation=est, covariance=cov)


def _fit(fs: ForecastSet, variant: str, options: TestOptions):
    if variant == VAR:
        est = estimate_quantile(fs, options.spec_q)
        cov = quantile_sandwich(fs, options.spec_q, est.theta_hat.beta, options.vcov)
    else:
        mode = STRICT if variant == STRICT_ES else JOINT_OR_AUX
        est = estimate(fs, options.spec_q, options.spec_e, mode, options.estimator)
        cov = sandwich(fs, options.spec_q, options.spec_e, mode, est.theta_hat, options.vcov)
    return est, cov


def _require(fs: ForecastSet, variant: str):
    if variant in (JOINT, AUX, VAR) and not fs.has_quantiles:
        name = {JOINT: "joint", AUX: "auxiliary", VAR: "VaR"}[variant]
        raise DataError(f"{name} test requires VaR forecasts")


def run_tests(fs: ForecastSet, variants: Iterable[str] = VARIANTS, directions: Iterable[int] = (1, 2),
              options: TestOptions = TestOptions()) -> Dict[Tuple[str, int], Union[TestReport, EncompassingError]]:
    """Run several variants and directions, estimating each model only once.

    Joint and auxiliary tests share the joint-mode estimate. Package errors
    are returned in place of a report so that one failing test does not
    stop the others.
    """
    variants = list(variants)
    directions = list(directions)
    out: Dict[Tuple[str, int], Union[TestReport, EncompassingError]] = {}
    fits: Dict[Tuple[str, bool], object] = {}

    def fit_for(variant, swapped):
        key = ("Strict" if variant == STRICT_ES else "VaR" if variant == VAR else "Joint", swapped)
        if key not in fits:
            try:
                fits[key] = _fit(fs.swapped() if swapped else fs, variant, options)
            except EncompassingError as exc:
                fits[key] = exc
        return fits[key]

    for variant in variants:
        for direction in directions:
            try:
                _require(fs, variant)
                spec_q = options.spec_q
                restriction = restriction_for(variant, direction, spec_q, options.spec_e,
                                              options.restrict_intercepts)
                swapped = restriction is None
                if swapped:
                    restriction = restriction_for(variant, 1, spec_q, options.spec_e,
                                                  options.restrict_intercepts)
                fit = fit_for(variant, swapped)
                if isinstance(fit, EncompassingError):
                    raise fit
                est, cov = fit
                out[(variant, direction)] = _report(variant, direction, est, cov, restriction, fs.n)
            except EncompassingError as exc:
                out[(variant, direction)] = exc
    return out


def run_test(fs: ForecastSet, variant: str, direction: int = 1,
             options: TestOptions = TestOptions()) -> TestReport:
    """Estimate, build the sandwich covariance and return the Wald test for one hypothesis."""
    res = run_tests(fs, [variant], [direction], options)[(variant, direction)]
    if isinstance(res, EncompassingError):
        raise res
    return res


def var_test(fs: ForecastSet, direction: int = 1, options: TestOptions = TestOptions()) -> TestReport:
    """VaR-only encompassing test based on quantile regression of the realizations."""
    return run_test(fs, VAR, direction, options)


def decide(p1: float, p2: float, level: float, theta_hat: Optional[Theta] = None) -> Decision:
    """Four-outcome rule from the p-values of H01 (p1) and H02 (p2).

    NR: neither rejected. E1: only H01 rejected (forecast 1 is encompassed).
    E2: only H02 rejected (forecast 1 encompasses). C: both rejected; the
    estimated combination weights are attached.
    """
    for p in (p1, p2):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p-values must lie in [0, 1]")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    r1, r2 = p1 <= level, p2 <= level
    if r1 and r2:
        return Decision(C, level, theta_hat)
    if r1:
        return Decision(E1, level)
    if r2:
        return Decision(E2, level)
    return Decision(NR, level)
