"""One-step-ahead VaR and ES forecasting models under a fixed forecasting scheme.

Each model is fitted once on the first ``m`` returns; the fitted recursion
is then run over the whole series with frozen parameters. Position ``t``
of a forecast path is the forecast for return ``t`` made with returns
``0, ..., t - 1``.

Models
------
HistSim      empirical quantile and tail mean of a trailing window
RiskMetrics  EWMA variance, 0.94 / 0.06, normal quantiles
GjrGarchT    GJR-GARCH(1,1) with standardized t innovations, maximum likelihood
GasT         t-GAS with time-varying scale and degrees of freedom, maximum likelihood
Gas1F        one-factor GAS for (VaR, ES), FZ0 minimization
Gas2F        two-factor GAS for (VaR, ES), FZ0 minimization
EsCaviarAS   asymmetric-slope CAViaR with an ES offset, FZ0 minimization
EsCaviarSAV  symmetric-absolute-value CAViaR with an ES offset, FZ0 minimization
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from ._kernels import PENALTY, nelder_mead
from .core import EncompassingError, NumericError, make_forecast_set
from .dgps import (GARCH_PARAMS, GAS1F_PARAMS, GAS2F_A, GAS2F_B, GAS2F_OMEGA, GAS_T_A, GAS_T_B,
                   GAS_T_KAPPA, CAVIAR_AS, CAVIAR_SAV, CAVIAR_X, GJR_PARAMS, NU_BOUNDS, _t_gas_score,
                   normal_tail, t_tail)
from .encompassing import C, E1, E2, NR, VARIANTS, TestOptions, decide, run_tests

__all__ = [
    "MODEL_KINDS",
    "FitDiverged",
    "ModelSpec",
    "FittedModel",
    "MatrixResult",
    "fit",
    "forecast_path",
    "pairwise_matrix",
]

HIST_SIM = "HistSim"
RISK_METRICS = "RiskMetrics"
GJR_GARCH_T = "GjrGarchT"
GAS_T = "GasT"
GAS_1F = "Gas1F"
GAS_2F = "Gas2F"
ES_CAVIAR_AS = "EsCaviarAS"
ES_CAVIAR_SAV = "EsCaviarSAV"
MODEL_KINDS = (HIST_SIM, RISK_METRICS, GJR_GARCH_T, GAS_T, GAS_1F, GAS_2F, ES_CAVIAR_AS, ES_CAVIAR_SAV)

RM_DECAY = 0.94
MIN_INSAMPLE = 250
N_STARTS = 5


class FitDiverged(NumericError):
    """Model estimation did not reach a finite objective."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    window: int = 250
    alpha: float = 0.025

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == HIST_SIM and self.window < 20:
            raise ValueError("HistSim window must be at least 20")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class FittedModel:
    """Frozen parameters plus the initial state taken from the in-sample data."""

    spec: ModelSpec
    params: np.ndarray
    init: np.ndarray
    objective: float = float("nan")
    diagnostics: Dict[str, object] = field(default_factory=dict)


# --------------------------------------------------------------------------
# Recursions. Each returns forecast arrays of length len(y) + 1 and a flag.


@njit(cache=True)
def _gjr_path(y, omega, a, g, b, v0):
    T = y.shape[0]
    v = np.empty(T + 1)
    v[0] = v0
    for t in range(T):
        lev = g if y[t] <= 0.0 else 0.0
        v[t + 1] = omega + (a + lev) * y[t] * y[t] + b * v[t]
    return v


@njit(cache=True)
def _gjr_negloglik(p, args):
    y, v0 = args
    omega = math.exp(p[0])
    a, g, b = p[1], p[2], p[3]
    nu = 2.05 + math.exp(p[4])
    viol = 0.0
    if a < 0.0:
        viol += -a
    if b < 0.0:
        viol += -b
    if a + g < 0.0:
        viol += -(a + g)
    if a + 0.5 * g + b >= 1.0:
        viol += a + 0.5 * g + b - 1.0 + 1e-6
    if viol > 0.0 or not np.isfinite(nu):
        return PENALTY * (1.0 + viol)
    v = _gjr_path(y, omega, a, g, b, v0)
    T = y.shape[0]
    c = math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(math.pi * (nu - 2.0))
    ll = 0.0
    for t in range(T):
        ll += c - 0.5 * math.log(v[t]) - 0.5 * (nu + 1.0) * math.log(1.0 + y[t] * y[t] / ((nu - 2.0) * v[t]))
    return -ll / T


@njit(cache=True)
def _gas_t_path(y, p, s0, nu0, lo, hi):
    T = y.shape[0]
    s = np.empty(T + 1)
    nus = np.empty(T + 1)
    s[0] = s0
    nus[0] = nu0
    mu = p[0]
    ok = True
    for t in range(T):
        s_sig, s_nu = _t_gas_score(y[t] - mu, s[t], nus[t])
        s[t + 1] = p[1] + p[3] * s[t] + p[2] * s_sig
        raw = p[4] + p[6] * nus[t] + p[5] * s_nu
        if not np.isfinite(raw) or raw < lo:
            raw = lo
        elif raw > hi:
            raw = hi
        nus[t + 1] = raw
        if not (s[t + 1] > 0.0) or not np.isfinite(s[t + 1]):
            ok = False
            break
    return s, nus, ok


@njit(cache=True)
def _gas_t_negloglik(p, args):
    y, s0, nu0, lo, hi = args
    if p[3] < 0.0 or p[3] >= 1.0 or p[2] < 0.0 or p[1] <= 0.0:
        return PENALTY * (1.0 + abs(p[3]) + abs(p[2]) + abs(p[1]))
    s, nus, ok = _gas_t_path(y, p, s0, nu0, lo, hi)
    if not ok:
        return PENALTY
    T = y.shape[0]
    ll = 0.0
    for t in range(T):
        nu = nus[t]
        x = (y[t] - p[0]) ** 2 / s[t]
        ll += (math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(math.pi * nu * s[t])
               - 0.5 * (nu + 1.0) * math.log(1.0 + x / nu))
    return -ll / T


@njit(cache=True)
def _fz0_mean(y, q, e, alpha):
    T = y.shape[0]
    total = 0.0
    for t in range(T):
        if not (e[t] < 0.0) or e[t] > q[t] or not np.isfinite(q[t]):
            return np.inf
        inner = e[t] - q[t]
        if y[t] <= q[t]:
            inner += (q[t] - y[t]) / alpha
        total += -inner / e[t] + math.log(-e[t])
    return total / T


@njit(cache=True)
def _gas1f_path(y, p, alpha):
    T = y.shape[0]
    q = np.empty(T + 1)
    e = np.empty(T + 1)
    k = 0.0
    for t in range(T + 1):
        q[t] = p[0] * math.exp(k)
        e[t] = p[1] * math.exp(k)
        if t < T:
            hit = 1.0 if y[t] <= q[t] else 0.0
            k = p[2] * k + p[3] / e[t] * (y[t] / alpha * hit - e[t])
            if not np.isfinite(k) or abs(k) > 50.0:
                for s in range(t + 1, T + 1):
                    q[s] = np.nan
                    e[s] = np.nan
                return q, e
    return q, e


@njit(cache=True)
def _gas2f_path(y, p, init, alpha):
    T = y.shape[0]
    q = np.empty(T + 1)
    e = np.empty(T + 1)
    q[0] = init[0]
    e[0] = init[1]
    for t in range(T):
        hit = 1.0 if y[t] <= q[t] else 0.0
        l1 = q[t] * (alpha - hit)
        l2 = hit * y[t] / alpha - e[t]
        q[t + 1] = p[0] + p[2] * q[t] + p[4] * l1 + p[5] * l2
        e[t + 1] = p[1] + p[3] * e[t] + p[6] * l1 + p[7] * l2
    return q, e


@njit(cache=True)
def _caviar_path(y, p, init, asym):
    # asym: p = (b0, b_pos, b_neg, b_q, g0, g1, g2); else (b0, b_abs, b_q, g0, g1, g2)
    T = y.shape[0]
    q = np.empty(T + 1)
    e = np.empty(T + 1)
    qt = init[0]
    x = init[1]
    o = 4 if asym else 3
    for t in range(T + 1):
        q[t] = qt
        e[t] = qt - x
        if t < T:
            d = y[t]
            if d <= qt:
                x = max(p[o] + p[o + 1] * (qt - d) + p[o + 2] * x, 0.0)
            if asym:
                qt = p[0] + (p[1] if d >= 0.0 else p[2]) * abs(d) + p[3] * qt
            else:
                qt = p[0] + p[1] * abs(d) + p[2] * qt
    return q, e


@njit(cache=True)
def _fz0_obj_gas1f(p, args):
    y, alpha = args
    if not (p[1] < p[0] < 0.0) or abs(p[2]) >= 1.0:
        return PENALTY * (1.0 + abs(p[2]))
    q, e = _gas1f_path(y, p, alpha)
    v = _fz0_mean(y, q[:-1], e[:-1], alpha)
    return v if np.isfinite(v) else PENALTY


@njit(cache=True)
def _fz0_obj_gas2f(p, args):
    y, init, alpha = args
    if abs(p[2]) >= 1.0 or abs(p[3]) >= 1.0:
        return PENALTY * (1.0 + abs(p[2]) + abs(p[3]))
    q, e = _gas2f_path(y, p, init, alpha)
    v = _fz0_mean(y, q[:-1], e[:-1], alpha)
    return v if np.isfinite(v) else PENALTY


@njit(cache=True)
def _fz0_obj_caviar(p, args):
    y, init, alpha, asym = args
    bq = p[3] if asym else p[2]
    if abs(bq) >= 1.0:
        return PENALTY * (1.0 + abs(bq))
    q, e = _caviar_path(y, p, init, asym)
    v = _fz0_mean(y, q[:-1], e[:-1], alpha)
    return v if np.isfinite(v) else PENALTY


# --------------------------------------------------------------------------
# Fitting


def _empirical_tail(x, alpha) -> Tuple[float, float]:
    """Inverse-CDF quantile and the mean of observations at or below it."""
    x = np.asarray(x, dtype=float)
    q = float(np.quantile(x, alpha, method="inverted_cdf"))
    tail = x[x <= q]
    e = float(np.mean(tail)) if tail.shape[0] >= 2 else float(np.min(x))
    return q, e


def _multistart(fun, args, starts, step_scale=0.1, max_evals=20000):
    best_x, best_f = None, np.inf
    for x0 in starts:
        x0 = np.asarray(x0, dtype=float)
        step = np.where(np.abs(x0) > 1e-8, step_scale * np.abs(x0), 1e-3)
        x1, f1, _, _ = nelder_mead(fun, x0, step, args, 1e-10, max_evals)
        x2, f2, _, _ = nelder_mead(fun, x1, 0.5 * step, args, 1e-10, max_evals)
        if f1 < f2:
            x2, f2 = x1, f1
        if f2 < best_f:
            best_x, best_f = x2, f2
    return best_x, best_f


def _perturbed(base, n=N_STARTS, scale=0.1, seed=0):
    rng = np.random.default_rng(seed)
    base = np.asarray(base, dtype=float)
    out = [base]
    for _ in range(n - 1):
        out.append(base * (1.0 + scale * rng.uniform(-1.0, 1.0, base.shape[0])))
    return out


def _check(kind, f, x):
    if x is None or not np.isfinite(f) or f >= PENALTY:
        raise FitDiverged(f"{kind} estimation did not reach a finite objective",
                          {"objective": float(f), "params": None if x is None else np.asarray(x).tolist()})


def fit(model: ModelSpec, insample) -> FittedModel:
    """Estimate ``model`` on the in-sample returns.

    Raises
    ------
    FitDiverged
        If no start point reaches a finite objective.
    """
    y = np.ascontiguousarray(insample, dtype=float)
    if y.ndim != 1 or y.shape[0] < MIN_INSAMPLE:
        raise ValueError(f"in-sample series needs at least {MIN_INSAMPLE} observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("in-sample returns must be finite")
    a = model.alpha
    kind = model.kind
    q0, e0 = _empirical_tail(y, a)
    var0 = float(np.var(y))

    if kind == HIST_SIM:
        return FittedModel(model, np.array([float(model.window)]), np.zeros(0), diagnostics={"window": model.window})
    if kind == RISK_METRICS:
        return FittedModel(model, np.array([RM_DECAY, 1.0 - RM_DECAY]), np.array([var0]))

    if kind == GJR_GARCH_T:
        # start from the simulation calibration, rescaled to the sample variance
        om, al, ga, be = GJR_PARAMS
        uncond = om / (1.0 - al - 0.5 * ga - be)
        starts = [np.array([math.log(om * var0 / uncond), al, ga, be, math.log(8.0 - 2.05)]),
                  np.array([math.log(0.05 * var0), 0.05, 0.05, 0.85, math.log(5.0 - 2.05)])]
        x, f = _multistart(_gjr_negloglik, (y, var0), starts)
        _check(kind, f, x)
        params = np.array([math.exp(x[0]), x[1], x[2], x[3], 2.05 + math.exp(x[4])])
        return FittedModel(model, params, np.array([var0]), float(f),
                           {"names": ("omega", "alpha", "gamma", "beta", "nu")})

    if kind == GAS_T:
        lo, hi = NU_BOUNDS
        base = np.array([float(np.mean(y)), GAS_T_KAPPA[1] * var0, GAS_T_A[1], GAS_T_B[1],
                         GAS_T_KAPPA[2], GAS_T_A[2], GAS_T_B[2]])
        nu0 = 8.0
        s0 = var0 * (nu0 - 2.0) / nu0
        args = (y, s0, nu0, lo, hi)
        x, f = _multistart(_gas_t_negloglik, args, _perturbed(base))
        _check(kind, f, x)
        return FittedModel(model, x, np.array([s0, nu0]), float(f),
                           {"names": ("mu", "kappa_s", "a_s", "b_s", "kappa_nu", "a_nu", "b_nu")})

    if kind == GAS_1F:
        base = np.array([q0, e0, GAS1F_PARAMS[2], GAS1F_PARAMS[3]])
        x, f = _multistart(_fz0_obj_gas1f, (y, a), _perturbed(base))
        _check(kind, f, x)
        return FittedModel(model, x, np.zeros(0), float(f), {"names": ("a_q", "a_e", "b", "c")})

    if kind == GAS_2F:
        A = np.array(GAS2F_A).T
        b = np.array(GAS2F_B)
        init = np.array([q0, e0])
        base = np.array([(1.0 - b[0]) * q0, (1.0 - b[1]) * e0, b[0], b[1], A[0, 0], A[0, 1], A[1, 0], A[1, 1]])
        x, f = _multistart(_fz0_obj_gas2f, (y, init, a), _perturbed(base))
        _check(kind, f, x)
        return FittedModel(model, x, init, float(f),
                           {"names": ("w_q", "w_e", "b_q", "b_e", "a_qq", "a_qe", "a_eq", "a_ee")})

    asym = kind == ES_CAVIAR_AS
    init = np.array([q0, max(q0 - e0, 0.0)])
    quant = list(CAVIAR_AS) if asym else list(CAVIAR_SAV)
    base = np.array(quant + [CAVIAR_X[0], CAVIAR_X[1], CAVIAR_X[2]])
    x, f = _multistart(_fz0_obj_caviar, (y, init, a, asym), _perturbed(base))
    _check(kind, f, x)
    return FittedModel(model, x, init, float(f))


def forecast_path(fitted: FittedModel, full, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """VaR and ES forecasts for returns ``m, ..., T - 1`` with frozen parameters."""
    y = np.ascontiguousarray(full, dtype=float)
    T = y.shape[0]
    if not 0 < m < T:
        raise ValueError("need 0 < m < len(full)")
    spec = fitted.spec
    a = spec.alpha
    kind = spec.kind
    z, xi = normal_tail(a)

    if kind == HIST_SIM:
        w = int(fitted.params[0])
        if m < w:
            raise ValueError("in-sample size must cover the HistSim window")
        q = np.empty(T - m)
        e = np.empty(T - m)
        for i, t in enumerate(range(m, T)):
            q[i], e[i] = _empirical_tail(y[t - w:t], a)
        return q, e

    if kind == RISK_METRICS:
        lam = fitted.params[0]
        v = np.empty(T + 1)
        v[0] = fitted.init[0]
        for t in range(T):
            v[t + 1] = lam * v[t] + (1.0 - lam) * y[t] * y[t]
        s = np.sqrt(v[m:T])
        return z * s, xi * s

    if kind == GJR_GARCH_T:
        om, al, ga, be, nu = fitted.params
        v = _gjr_path(y, om, al, ga, be, fitted.init[0])
        zt, et = t_tail(a, nu)
        c = math.sqrt((nu - 2.0) / nu)
        s = np.sqrt(v[m:T]) * c
        return float(zt) * s, float(et) * s

    if kind == GAS_T:
        s2, nus, ok = _gas_t_path(y, fitted.params, fitted.init[0], fitted.init[1], NU_BOUNDS[0], NU_BOUNDS[1])
        if not ok:
            raise FitDiverged("t-GAS scale left the positive half-line out of sample")
        zt, et = t_tail(a, nus[m:T])
        s = np.sqrt(s2[m:T])
        mu = fitted.params[0]
        return mu + zt * s, mu + et * s

    if kind == GAS_1F:
        q, e = _gas1f_path(y, fitted.params, a)
    elif kind == GAS_2F:
        q, e = _gas2f_path(y, fitted.params, fitted.init, a)
    else:
        q, e = _caviar_path(y, fitted.params, fitted.init, kind == ES_CAVIAR_AS)
    return q[m:T].copy(), e[m:T].copy()


# --------------------------------------------------------------------------
# Pairwise encompassing tables


@dataclass
class MatrixResult:
    """P-value and outcome matrices for every variant.

    ``pvalues[variant][i, j]`` is the p-value of "model i encompasses model
    j" (NaN on the diagonal and for failed pairs, whose reason is kept in
    ``reasons``). ``outcomes[variant][i][j]`` applies the decision rule
    with model i as the first forecaster.
    """

    models: List[str]
    level: float
    pvalues: Dict[str, np.ndarray]
    outcomes: Dict[str, List[List[Optional[str]]]]
    reasons: Dict[str, Dict[Tuple[int, int], str]]
    fit_errors: Dict[str, str] = field(default_factory=dict)

    def frequencies(self, variant: str) -> Dict[str, Dict[str, float]]:
        """Relative frequency of NR/E1/E2/C per model over its non-missing row cells."""
        out = {}
        for i, name in enumerate(self.models):
            cells = [o for j, o in enumerate(self.outcomes[variant][i]) if j != i and o is not None]
            out[name] = {k: (cells.count(k) / len(cells) if cells else float("nan")) for k in (NR, E1, E2, C)}
        return out


def _pair_task(args):
    i, j, y, qs, es, alpha, variants, options = args
    try:
        fs = make_forecast_set(y, es[i], es[j], alpha, qs[i], qs[j])
    except EncompassingError as exc:
        return i, j, {v: exc for v in variants}
    reports = run_tests(fs, variants, (1, 2), options)
    out = {}
    for v in variants:
        r1, r2 = reports[(v, 1)], reports[(v, 2)]
        out[v] = r1 if isinstance(r1, EncompassingError) else (
            r2 if isinstance(r2, EncompassingError) else (r1.p_value, r2.p_value))
    return i, j, out


def pairwise_matrix(returns, m: int, models: Sequence[ModelSpec], variants: Sequence[str] = VARIANTS,
                    level: float = 0.10, options: TestOptions = TestOptions(), workers: int = 1) -> MatrixResult:
    """Fit every model on ``returns[:m]`` and run all pairwise encompassing tests.

    Each unordered pair is estimated once; its two directions fill the
    ``(i, j)`` and ``(j, i)`` cells. A model whose fit fails leaves NA cells
    with the error as reason.
    """
    if len(models) < 2:
        raise ValueError("need at least two models")
    y_all = np.asarray(returns, dtype=float)
    y = y_all[m:]
    k = len(models)
    names = [s.label for s in models]
    qs: List[Optional[np.ndarray]] = [None] * k
    es: List[Optional[np.ndarray]] = [None] * k
    fit_errors: Dict[str, str] = {}
    for i, spec in enumerate(models):
        try:
            fitted = fit(spec, y_all[:m])
            qs[i], es[i] = forecast_path(fitted, y_all, m)
        except EncompassingError as exc:
            fit_errors[names[i]] = f"{type(exc).__name__}: {exc}"
    alpha = models[0].alpha
    variants = list(variants)
    pv = {v: np.full((k, k), np.nan) for v in variants}
    reasons: Dict[str, Dict[Tuple[int, int], str]] = {v: {} for v in variants}
    tasks = []
    for i in range(k):
        for j in range(i + 1, k):
            if qs[i] is None or qs[j] is None:
                bad = names[i] if qs[i] is None else names[j]
                for v in variants:
                    reasons[v][(i, j)] = reasons[v][(j, i)] = f"FitFailed: {bad}"
                continue
            tasks.append((i, j, y, qs, es, alpha, variants, options))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_pair_task, tasks))
    else:
        results = [_pair_task(t) for t in tasks]
    for i, j, out in results:
        for v, r in out.items():
            if isinstance(r, EncompassingError):
                reasons[v][(i, j)] = reasons[v][(j, i)] = f"{type(r).__name__}: {r}"
            else:
                pv[v][i, j], pv[v][j, i] = r
    outcomes = {}
    for v in variants:
        grid: List[List[Optional[str]]] = [[None] * k for _ in range(k)]
        for i in range(k):
            for j in range(k):
                if i != j and np.isfinite(pv[v][i, j]):
                    grid[i][j] = decide(pv[v][i, j], pv[v][j, i], level).outcome
        outcomes[v] = grid
    return MatrixResult(names, level, pv, outcomes, reasons, fit_errors)
