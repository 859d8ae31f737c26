"""Simulated returns from convex combinations of two forecasting models.

Each generator returns the realizations together with both models' VaR and
ES forecasts. With ``pi = 0`` the data follow model 1 (so forecaster 1
encompasses forecaster 2), with ``pi = 1`` they follow model 2, and for
intermediate weights both forecasters carry information.

Array position ``t`` holds the forecast made at ``t - 1`` for the
realization at ``t``. Randomness comes from a Philox counter-based
generator keyed on ``DgpSpec.seed``, which may be an integer or a tuple of
integers (used for per-replication streams).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from numba import njit
from scipy import stats

from .core import ForecastSet, NumericError, make_forecast_set

__all__ = [
    "GARCH_COMBO",
    "GAS_T_COMBO",
    "VARES_GAS_COMBO",
    "ES_CAVIAR_COMBO",
    "FAMILIES",
    "UnstableRecursion",
    "DgpSpec",
    "normal_tail",
    "t_tail",
    "simulate",
    "simulate_garch_combo",
    "simulate_gas_t_combo",
    "simulate_varesgas_combo",
    "simulate_escaviar_combo",
]

GARCH_COMBO = "GarchCombo"
GAS_T_COMBO = "GasTCombo"
VARES_GAS_COMBO = "VarEsGasCombo"
ES_CAVIAR_COMBO = "EsCaviarCombo"
FAMILIES = (GARCH_COMBO, GAS_T_COMBO, VARES_GAS_COMBO, ES_CAVIAR_COMBO)

# GARCH(1,1) and GJR-GARCH(1,1) calibrated to daily IBM returns.
GARCH_PARAMS = (0.042, 0.053, 0.925)
GJR_PARAMS = (0.044, 0.024, 0.058, 0.923)
# t-GAS: intercepts, score loadings and autoregressive terms for (mu, sigma^2, nu).
GAS_T_KAPPA = (0.0659, 0.00599, -1.737)
GAS_T_A = (0.0, 0.146, 7.563)
GAS_T_B = (0.0, 0.994, 7.381)
NU_BOUNDS = (2.1, 200.0)
MAX_CLAMP_FRACTION = 0.10
# One-factor and two-factor GAS models for (VaR, ES).
GAS1F_PARAMS = (-1.164, -1.757, 0.995, 0.007)
GAS2F_OMEGA = (-0.009, -0.010)
GAS2F_B = (0.993, 0.994)
# Loadings as printed; rows are read as forcing variables (VaR row first).
# Read row-wise per equation, the VaR forecast falls by about 0.58 after
# every non-violation and the recursion diverges within one step.
GAS2F_A = ((-0.358, -0.351), (-0.003, -0.003))
# ES-CAViaR quantile and ES-offset recursions.
CAVIAR_AS = (-0.0003, 0.05, 0.15, 0.8)
CAVIAR_SAV = (-0.0003, 0.1, 0.8)
CAVIAR_X = (0.00017, 0.125, 0.84)
CAVIAR_NOISE_SD = 0.1


class UnstableRecursion(NumericError):
    """A simulated recursion left the region where forecasts are valid."""


@dataclass(frozen=True)
class DgpSpec:
    """Simulation settings.

    ``flip_x_inequality`` updates the ES-CAViaR offset on VaR violations
    instead of non-violations. ``strict_nu`` turns the t-GAS clamping
    diagnostic into an error when more than 10% of steps hit a bound.
    """

    family: str = GARCH_COMBO
    pi: float = 0.0
    n: int = 1000
    burn_in: int = 1000
    seed: Union[int, Tuple[int, ...]] = 0
    alpha: float = 0.025
    flip_x_inequality: bool = False
    strict_nu: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown DGP family {self.family!r}")
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError("pi must lie in [0, 1]")
        if int(self.n) < 1 or int(self.burn_in) < 0:
            raise ValueError("n must be positive and burn_in non-negative")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        seed = self.seed
        if isinstance(seed, (list, tuple, np.ndarray)):
            seed = tuple(int(s) for s in seed)
        else:
            seed = int(seed)
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "burn_in", int(self.burn_in))


def normal_tail(alpha: float) -> Tuple[float, float]:
    """Standard normal ``alpha``-quantile and ``alpha``-ES."""
    z = stats.norm.ppf(alpha)
    return float(z), float(-stats.norm.pdf(z) / alpha)


def t_tail(alpha: float, nu) -> Tuple[np.ndarray, np.ndarray]:
    """Quantile and ES of a standard (unit scale) t distribution with ``nu`` dof."""
    nu = np.asarray(nu, dtype=float)
    z = stats.t.ppf(alpha, nu)
    es = -(nu + z * z) / (nu - 1.0) * stats.t.pdf(z, nu) / alpha
    return z, es


def _children(seed, k: int):
    return np.random.SeedSequence(seed).spawn(k)


def _gen(ss) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(ss))


def _streams(seed, k: int):
    return [_gen(c) for c in _children(seed, k)]


def _finish(spec: DgpSpec, y, q1, e1, q2, e2, diag: dict, full: bool):
    b = spec.burn_in
    fs = make_forecast_set(y[b:], e1[b:], e2[b:], spec.alpha, q1[b:], q2[b:])
    if full:
        return fs, {k: (v[b:] if isinstance(v, np.ndarray) and v.shape[0] == y.shape[0] else v)
                    for k, v in diag.items()}
    return fs


# --------------------------------------------------------------------------
# GARCH / GJR-GARCH


@njit(cache=True)
def _garch_pair(u, pi, g, j):
    N = u.shape[0]
    s1 = np.empty(N)
    s2 = np.empty(N)
    y = np.empty(N)
    v1 = g[0] / (1.0 - g[1] - g[2])
    v2 = j[0] / (1.0 - j[1] - 0.5 * j[2] - j[3])
    for t in range(N):
        a = np.sqrt(v1)
        b = np.sqrt(v2)
        s1[t] = a
        s2[t] = b
        y[t] = ((1.0 - pi) * a + pi * b) * u[t]
        y1 = a * u[t]
        y2 = b * u[t]
        v1 = g[0] + g[1] * y1 * y1 + g[2] * v1
        lev = j[2] if y2 <= 0.0 else 0.0
        v2 = j[0] + (j[1] + lev) * y2 * y2 + j[3] * v2
    return y, s1, s2


def simulate_garch_combo(spec: DgpSpec, full: bool = False):
    """GARCH(1,1) versus GJR-GARCH(1,1), ``Y = ((1 - pi) s1 + pi s2) u``.

    Both models are driven by the same standard normal ``u`` through their
    own returns ``s_j u``; forecasts are ``z_alpha s_j`` and ``xi_alpha s_j``.
    """
    N = spec.n + spec.burn_in
    (rng,) = _streams(spec.seed, 1)
    u = rng.standard_normal(N)
    y, s1, s2 = _garch_pair(u, float(spec.pi), np.array(GARCH_PARAMS), np.array(GJR_PARAMS))
    z, xi = normal_tail(spec.alpha)
    return _finish(spec, y, z * s1, xi * s1, z * s2, xi * s2, {"sigma1": s1, "sigma2": s2}, full)


# --------------------------------------------------------------------------
# GARCH versus t-GAS with time-varying variance and degrees of freedom


@njit(cache=True)
def _digamma(x):
    r = 0.0
    while x < 6.0:
        r -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    return r + np.log(x) - 0.5 / x - f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f / 132))))


@njit(cache=True)
def _trigamma(x):
    r = 0.0
    while x < 6.0:
        r += 1.0 / (x * x)
        x += 1.0
    f = 1.0 / (x * x)
    return r + 1.0 / x + 0.5 * f + (1.0 / x) * f * (1.0 / 6 - f * (1.0 / 30 - f * (1.0 / 42 - f / 30)))


@njit(cache=True)
def _gamma_draw(a, normals, uniforms, pos):
    # Marsaglia-Tsang for shape a >= 1; pos tracks buffer use.
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        if pos[0] >= normals.shape[0] or pos[1] >= uniforms.shape[0]:
            return -1.0
        x = normals[pos[0]]
        pos[0] += 1
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = uniforms[pos[1]]
        pos[1] += 1
        if np.log(u) < 0.5 * x * x + d - d * v + d * np.log(v):
            return d * v


@njit(cache=True)
def _t_gas_score(eps, s2, nu):
    x = eps * eps / s2
    w = (nu + 1.0) / (nu + x)
    s_sig = (nu + 3.0) / nu * (w * eps * eps - s2)
    grad = 0.5 * (_digamma(0.5 * (nu + 1.0)) - _digamma(0.5 * nu) - 1.0 / nu
                  - np.log(1.0 + x / nu) + (nu + 1.0) * x / (nu * (nu + x)))
    info = 0.25 * (_trigamma(0.5 * nu) - _trigamma(0.5 * (nu + 1.0))) \
        - (nu + 5.0) / (2.0 * nu * (nu + 1.0) * (nu + 3.0))
    return s_sig, grad / info


@njit(cache=True)
def _gas_t_pair(u1, z2, mix, normals, uniforms, g, kappa, A, B, lo, hi):
    N = u1.shape[0]
    s1 = np.empty(N)
    s2 = np.empty(N)
    nus = np.empty(N)
    y = np.empty(N)
    clamped = np.zeros(N, dtype=np.bool_)
    v1 = g[0] / (1.0 - g[1] - g[2])
    var2 = kappa[1] / (1.0 - B[1])
    mu = kappa[0]
    nu = min(max(kappa[2] / (1.0 - B[2]), lo), hi)
    pos = np.zeros(2, dtype=np.int64)
    for t in range(N):
        a = np.sqrt(v1)
        s1[t] = a
        s2[t] = np.sqrt(var2)
        nus[t] = nu
        y1 = a * u1[t]
        gam = _gamma_draw(0.5 * nu, normals, uniforms, pos)
        if gam < 0.0:
            return y, s1, s2, nus, clamped, False
        y2 = mu + s2[t] * z2[t] / np.sqrt(2.0 * gam / nu)
        y[t] = y2 if mix[t] else y1
        v1 = g[0] + g[1] * y1 * y1 + g[2] * v1
        s_sig, s_nu = _t_gas_score(y2 - mu, var2, nu)
        var2 = kappa[1] + B[1] * var2 + A[1] * s_sig
        raw = kappa[2] + B[2] * nu + A[2] * s_nu
        if raw < lo or raw > hi or not np.isfinite(raw):
            clamped[t] = True
            nu = lo if not raw >= lo else hi
        else:
            nu = raw
    return y, s1, s2, nus, clamped, True


def simulate_gas_t_combo(spec: DgpSpec, full: bool = False):
    """Gaussian GAS (GARCH) versus t-GAS, mixed by per-period Bernoulli draws.

    The t-GAS model updates ``(sigma^2, nu)`` with score steps scaled by the
    diagonal of the inverse Fisher information; ``sigma`` is the scale of
    the t distribution. The printed autoregressive term for ``nu`` exceeds
    one, so ``nu`` is clamped to [2.1, 200]; the share of clamped steps is
    reported in the diagnostics (``full=True``).

    Raises
    ------
    UnstableRecursion
        With ``spec.strict_nu`` when more than 10% of steps were clamped.
    """
    N = spec.n + spec.burn_in
    c_u, c_z, c_mix, c_gn, c_gu = _children(spec.seed, 5)
    u1 = _gen(c_u).standard_normal(N)
    z2 = _gen(c_z).standard_normal(N)
    mix = _gen(c_mix).random(N) < spec.pi
    # Buffers for the gamma sampler; regenerated longer (same prefix) if exhausted.
    size = 2 * N + 64
    while True:
        normals = _gen(c_gn).standard_normal(size)
        uniforms = _gen(c_gu).random(size)
        y, s1, s2, nus, clamped, ok = _gas_t_pair(
            u1, z2, mix, normals, uniforms, np.array(GARCH_PARAMS), np.array(GAS_T_KAPPA),
            np.array(GAS_T_A), np.array(GAS_T_B), NU_BOUNDS[0], NU_BOUNDS[1])
        if ok:
            break
        size *= 2
    if not np.all(np.isfinite(s2)) or np.any(s2 <= 0):
        raise UnstableRecursion("t-GAS variance left the positive half-line")
    frac = float(np.mean(clamped[spec.burn_in:]))
    if spec.strict_nu and frac > MAX_CLAMP_FRACTION:
        raise UnstableRecursion(f"degrees of freedom clamped in {frac:.1%} of steps")
    z, xi = normal_tail(spec.alpha)
    zt, est = t_tail(spec.alpha, nus)
    mu = GAS_T_KAPPA[0]
    diag = {"sigma1": s1, "sigma2": s2, "nu": nus, "component": mix.astype(np.int8),
            "nu_clamp_fraction": frac}
    return _finish(spec, y, z * s1, xi * s1, mu + zt * s2, mu + est * s2, diag, full)


# --------------------------------------------------------------------------
# One-factor and two-factor GAS models for (VaR, ES)


@njit(cache=True)
def _vares_gas_pair(z1, z2, mix, alpha, zq, xi, p1, om, B, A):
    N = z1.shape[0]
    q1 = np.empty(N)
    e1 = np.empty(N)
    q2 = np.empty(N)
    e2 = np.empty(N)
    y = np.empty(N)
    kap = 0.0
    qa = om[0] / (1.0 - B[0])
    ea = om[1] / (1.0 - B[1])
    for t in range(N):
        q1[t] = p1[0] * np.exp(kap)
        e1[t] = p1[1] * np.exp(kap)
        q2[t] = qa
        e2[t] = ea
        if not (q2[t] < 0.0 and e2[t] < q2[t]) or not (q1[t] < 0.0 and e1[t] < q1[t]):
            return y, q1, e1, q2, e2, t
        sd1 = (e1[t] - q1[t]) / (xi - zq)
        sd2 = (e2[t] - q2[t]) / (xi - zq)
        y1 = q1[t] - zq * sd1 + sd1 * z1[t]
        y2 = q2[t] - zq * sd2 + sd2 * z2[t]
        y[t] = y2 if mix[t] else y1
        h1 = 1.0 if y1 <= q1[t] else 0.0
        kap = p1[2] * kap + p1[3] / e1[t] * (y1 / alpha * h1 - e1[t])
        h2 = 1.0 if y2 <= q2[t] else 0.0
        l1 = q2[t] * (alpha - h2)
        l2 = h2 * y2 / alpha - e2[t]
        qa = om[0] + B[0] * q2[t] + A[0, 0] * l1 + A[0, 1] * l2
        ea = om[1] + B[1] * e2[t] + A[1, 0] * l1 + A[1, 1] * l2
    return y, q1, e1, q2, e2, -1


def simulate_varesgas_combo(spec: DgpSpec, full: bool = False):
    """1F-GAS versus 2F-GAS for (VaR, ES), mixed by per-period Bernoulli draws.

    Each model draws a normal return whose quantile and ES equal its own
    forecasts.

    Raises
    ------
    UnstableRecursion
        If a VaR forecast becomes non-negative or an ES forecast is not
        below the VaR forecast.
    """
    N = spec.n + spec.burn_in
    r1, r2, r_mix = _streams(spec.seed, 3)
    z1 = r1.standard_normal(N)
    z2 = r2.standard_normal(N)
    mix = r_mix.random(N) < spec.pi
    zq, xi = normal_tail(spec.alpha)
    y, q1, e1, q2, e2, bad = _vares_gas_pair(
        z1, z2, mix, float(spec.alpha), zq, xi, np.array(GAS1F_PARAMS), np.array(GAS2F_OMEGA),
        np.array(GAS2F_B), np.ascontiguousarray(np.array(GAS2F_A).T))
    if bad >= 0:
        raise UnstableRecursion(f"VaR/ES GAS forecasts left the valid region at step {bad}")
    diag = {"component": mix.astype(np.int8)}
    return _finish(spec, y, q1, e1, q2, e2, diag, full)


# --------------------------------------------------------------------------
# ES-CAViaR (asymmetric slope versus symmetric absolute value)


@njit(cache=True)
def _escaviar_pair(drv, eps, pi, as_p, sav_p, xp, flip):
    N = eps.shape[0]
    q1 = np.empty(N)
    e1 = np.empty(N)
    q2 = np.empty(N)
    e2 = np.empty(N)
    y = np.empty(N)
    qa = as_p[0] / (1.0 - as_p[3])
    qb = sav_p[0] / (1.0 - sav_p[2])
    xa = 0.0
    xb = 0.0
    for t in range(N):
        q1[t] = qa
        e1[t] = qa - xa
        q2[t] = qb
        e2[t] = qb - xb
        y[t] = (1.0 - pi) * e1[t] + pi * e2[t] + eps[t]
        d = drv[t]
        up1 = (q1[t] > d) if flip else (q1[t] <= d)
        up2 = (q2[t] > d) if flip else (q2[t] <= d)
        if up1:
            xa = max(xp[0] + xp[1] * (q1[t] - d) + xp[2] * q1[t], 0.0)
        if up2:
            xb = max(xp[0] + xp[1] * (q2[t] - d) + xp[2] * q2[t], 0.0)
        qa = as_p[0] - (as_p[2] if d < 0.0 else as_p[1]) * abs(d) + as_p[3] * q1[t]
        qb = sav_p[0] - sav_p[1] * abs(d) + sav_p[2] * q2[t]
    return y, q1, e1, q2, e2


def simulate_escaviar_combo(spec: DgpSpec, full: bool = False):
    """AS-ES-CAViaR versus SAV-ES-CAViaR with ``Y = (1 - pi) e1 + pi e2 + eps``.

    ``eps ~ N(-0.1 xi_alpha, 0.1^2)`` has zero ES, so the ES of ``Y`` is the
    combination of the two ES forecasts. Both recursions are driven by a
    common standard normal return series. The ES offset ``x`` follows the
    printed recursion (updated when the VaR is not violated, or on
    violations with ``spec.flip_x_inequality``) and is floored at zero.
    """
    N = spec.n + spec.burn_in
    r_drv, r_eps = _streams(spec.seed, 2)
    _, xi = normal_tail(spec.alpha)
    sd = CAVIAR_NOISE_SD
    drv = r_drv.standard_normal(N)
    eps = r_eps.normal(-sd * xi, sd, N)
    y, q1, e1, q2, e2 = _escaviar_pair(drv, eps, float(spec.pi), np.array(CAVIAR_AS), np.array(CAVIAR_SAV),
                                       np.array(CAVIAR_X), bool(spec.flip_x_inequality))
    if np.any(q1 >= 0) or np.any(q2 >= 0) or np.any(e1 > q1) or np.any(e2 > q2):
        raise UnstableRecursion("ES-CAViaR forecasts left the valid region")
    diag = {"x1": q1 - e1, "x2": q2 - e2, "eps": eps, "driver": drv}
    return _finish(spec, y, q1, e1, q2, e2, diag, full)


_DISPATCH = {
    GARCH_COMBO: simulate_garch_combo,
    GAS_T_COMBO: simulate_gas_t_combo,
    VARES_GAS_COMBO: simulate_varesgas_combo,
    ES_CAVIAR_COMBO: simulate_escaviar_combo,
}


def simulate(spec: DgpSpec, full: bool = False):
    """Simulate the family named in ``spec``; ``full=True`` also returns diagnostics."""
    return _DISPATCH[spec.family](spec, full)
