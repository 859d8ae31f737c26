"""M-estimation of the combination parameters under the FZ0 loss.

Two modes are supported. ``JOINT_OR_AUX`` feeds the VaR forecasts to the
quantile link; ``STRICT`` feeds the ES forecasts to both links, so only ES
forecasts are needed.

Estimation runs on data divided by a positive scale (the mean absolute ES
forecast), which makes the optimizer path invariant to the units of the
returns. Intercepts are mapped back to the original units afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from ._kernels import PENALTY, fz0_combo_objective, nelder_mead
from .core import DataError, DimensionMismatch, ForecastSet, NumericError
from .links import CONVEX_WEIGHTS, LINEAR_INTERCEPT, LINEAR_NO_INTERCEPT, LinkSpec

__all__ = [
    "JOINT_OR_AUX",
    "STRICT",
    "Theta",
    "EstimatorOptions",
    "EstimationResult",
    "NoFeasibleStart",
    "design",
    "objective",
    "start_points",
    "estimate",
    "estimate_quantile",
]

JOINT_OR_AUX = "JointOrAux"
STRICT = "Strict"


class NoFeasibleStart(NumericError):
    """No start point led to a parameter with finite FZ0 loss."""


@dataclass(frozen=True)
class Theta:
    """Combination parameters split into the quantile block and the ES block."""

    beta: np.ndarray
    eta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).reshape(-1))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(-1))

    @property
    def k_beta(self) -> int:
        return self.beta.shape[0]

    @property
    def k_eta(self) -> int:
        return self.eta.shape[0]

    @property
    def k(self) -> int:
        return self.k_beta + self.k_eta

    def vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.eta])

    @classmethod
    def from_vector(cls, v, k_beta: int) -> "Theta":
        v = np.asarray(v, dtype=float)
        return cls(v[:k_beta].copy(), v[k_beta:].copy())


@dataclass(frozen=True)
class EstimatorOptions:
    """Multi-start Nelder-Mead settings.

    ``n_restarts`` counts the random perturbations of the null parameter;
    the null parameter and the opposite null are always tried as well.
    """

    seed: int = 0
    n_restarts: int = 10
    tol: float = 1e-8
    max_evals: int = 20000
    bound: float = 50.0
    perturbation: float = 0.25
    step: float = 0.1


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: Theta
    objective: float
    converged: bool
    n_restarts_used: int
    feasible: bool
    n_evals: int = 0
    start_objectives: Tuple[float, ...] = ()


def _check_mode(fs: ForecastSet, mode: str):
    if mode == JOINT_OR_AUX:
        if not fs.has_quantiles:
            raise DataError("joint and auxiliary estimation require VaR forecasts")
    elif mode != STRICT:
        raise ValueError(f"unknown estimation mode {mode!r}")


def data_scale(fs: ForecastSet) -> float:
    return float(0.5 * (np.mean(np.abs(fs.e1)) + np.mean(np.abs(fs.e2))))


def design(fs: ForecastSet, spec_q: LinkSpec, spec_e: LinkSpec, mode: str, scale: float = 1.0):
    """Affine pieces ``(y, oq, Xq, oe, Xe)`` of both links, data divided by ``scale``.

    Intercept columns stay equal to one, so intercept parameters are
    expressed in units of ``scale``.
    """
    _check_mode(fs, mode)
    fq1, fq2 = (fs.q1, fs.q2) if mode == JOINT_OR_AUX else (fs.e1, fs.e2)
    oq, Xq = spec_q.design(fq1 / scale, fq2 / scale)
    oe, Xe = spec_e.design(fs.e1 / scale, fs.e2 / scale)
    return (np.ascontiguousarray(fs.y / scale), oq, np.asfortranarray(Xq),
            oe, np.asfortranarray(Xe))


def _scale_vector(spec_q: LinkSpec, spec_e: LinkSpec, scale: float) -> np.ndarray:
    sv = np.ones(spec_q.k + spec_e.k)
    if spec_q.intercept:
        sv[0] = scale
    if spec_e.intercept:
        sv[spec_q.k] = scale
    return sv


def _kernel_args(fs, spec_q, spec_e, mode, bound):
    s = data_scale(fs)
    y, oq, Xq, oe, Xe = design(fs, spec_q, spec_e, mode, s)
    return s, (y, oq, Xq, oe, Xe, float(fs.alpha), float(bound), True)


def objective(fs: ForecastSet, spec_q: LinkSpec, spec_e: LinkSpec, mode: str, theta,
              bound: float = 50.0) -> float:
    """Mean FZ0 loss at ``theta``, or a value >= 1e10 outside the feasible region.

    Feasibility requires ``g^e < -1e-8`` and ``g^e <= g^q`` at every
    observation and ``|theta_i| <= bound`` for the scale-free parameters.
    """
    v = theta.vector() if isinstance(theta, Theta) else np.asarray(theta, dtype=float).reshape(-1)
    if v.shape[0] != spec_q.k + spec_e.k:
        raise DimensionMismatch(f"expected {spec_q.k + spec_e.k} parameters, got {v.shape[0]}")
    s, args = _kernel_args(fs, spec_q, spec_e, mode, bound)
    val = fz0_combo_objective(v / _scale_vector(spec_q, spec_e, s), args)
    return float(val) if val >= PENALTY else float(val + np.log(s))


def _mirror(spec: LinkSpec, block: np.ndarray) -> Optional[np.ndarray]:
    """Parameter giving the same combination when the two forecasts are exchanged."""
    out = block.copy()
    i = 1 if spec.intercept else 0
    if spec.kind in (LINEAR_INTERCEPT, LINEAR_NO_INTERCEPT):
        out[i], out[i + 1] = block[i + 1], block[i]
    elif spec.kind == CONVEX_WEIGHTS:
        out[i] = 1.0 - block[i]
    else:
        return None
    return out


def start_points(spec_q: LinkSpec, spec_e: LinkSpec, options: EstimatorOptions) -> List[np.ndarray]:
    """Scale-free start points: the null, the opposite null, then perturbations.

    Perturbations come in mirrored pairs (when the links allow it) so the
    start set is closed under exchanging the two forecasters.
    """
    null = np.concatenate([spec_q.null_value(1), spec_e.null_value(1)])
    starts = [null]
    opp_q, opp_e = spec_q.null_value(2), spec_e.null_value(2)
    if opp_q is not None and opp_e is not None:
        starts.append(np.concatenate([opp_q, opp_e]))
    rng = np.random.default_rng(options.seed)
    kq = spec_q.k
    u = None
    for i in range(options.n_restarts):
        if i % 2 == 0:
            u = rng.uniform(-options.perturbation, options.perturbation, null.shape[0])
            starts.append(null + u)
        else:
            x = null + u
            mq, me = _mirror(spec_q, x[:kq]), _mirror(spec_e, x[kq:])
            if mq is None or me is None:
                u = rng.uniform(-options.perturbation, options.perturbation, null.shape[0])
                starts.append(null + u)
            else:
                starts.append(np.concatenate([mq, me]))
    return starts


def _multistart(fun, args, starts, options):
    best_x, best_f, best_conv = None, np.inf, False
    total_evals = 0
    start_f = []
    step = np.full(starts[0].shape[0], options.step)
    for x0 in starts:
        x0 = np.asarray(x0, dtype=float)
        start_f.append(float(fun(x0, args)))
        x1, f1, ev1, _ = nelder_mead(fun, x0, step, args, options.tol, options.max_evals)
        x2, f2, ev2, conv = nelder_mead(fun, x1, step, args, options.tol, options.max_evals)
        total_evals += ev1 + ev2
        if f1 < f2:
            x2, f2 = x1, f1
        if f2 < best_f:
            best_x, best_f, best_conv = x2, f2, conv
    return best_x, best_f, best_conv, total_evals, start_f


def estimate(fs: ForecastSet, spec_q: LinkSpec, spec_e: LinkSpec, mode: str,
             options: EstimatorOptions = EstimatorOptions()) -> EstimationResult:
    """Minimize the mean FZ0 loss of the combined forecasts over theta.

    Each start point is refined by a Nelder-Mead run followed by one more
    run restarted at its solution; the best feasible solution wins. The
    result is a deterministic function of the data and ``options``.

    Raises
    ------
    NoFeasibleStart
        If every run ends at an infeasible parameter.
    """
    s, args = _kernel_args(fs, spec_q, spec_e, mode, options.bound)
    starts = start_points(spec_q, spec_e, options)
    x, f, conv, evals, start_f = _multistart(fz0_combo_objective, args, starts, options)
    if not f < PENALTY:
        raise NoFeasibleStart("no start point reached the feasible region")
    sv = _scale_vector(spec_q, spec_e, s)
    log_s = np.log(s)
    return EstimationResult(
        theta_hat=Theta.from_vector(x * sv, spec_q.k),
        objective=float(f + log_s),
        converged=bool(conv),
        n_restarts_used=len(starts),
        feasible=True,
        n_evals=int(evals),
        start_objectives=tuple(v + log_s if v < PENALTY else v for v in start_f),
    )


def estimate_quantile(fs: ForecastSet, spec_q: LinkSpec) -> EstimationResult:
    """Quantile regression of the realizations on the combined VaR forecasts.

    Minimizes the mean tick loss exactly, as a linear program.
    """
    if not fs.has_quantiles:
        raise DataError("the VaR test requires VaR forecasts")
    s = float(0.5 * (np.mean(np.abs(fs.q1)) + np.mean(np.abs(fs.q2))))
    if not s > 0:
        s = 1.0
    off, X = spec_q.design(fs.q1 / s, fs.q2 / s)
    r = fs.y / s - off
    n, k = X.shape
    a = float(fs.alpha)
    # Dual form: max r'd  s.t.  X'd = (1 - alpha) X'1,  0 <= d <= 1; beta is
    # minus the equality multipliers.
    res = linprog(-r, A_eq=X.T, b_eq=(1.0 - a) * X.sum(axis=0), bounds=(0.0, 1.0), method="highs")
    if res.status != 0:
        raise NumericError(f"quantile regression failed: {res.message}")
    beta = -np.asarray(res.eqlin.marginals, dtype=float)
    u = r - X @ beta
    tick = np.mean((np.where(u < 0, 1.0, 0.0) - a) * (-u))
    if spec_q.intercept:
        beta[0] *= s
    return EstimationResult(theta_hat=Theta(beta), objective=float(tick * s), converged=True,
                            n_restarts_used=1, feasible=True)
