"""Misspecification-robust sandwich covariance of the combination estimator.

``Omega = Lambda^{-1} Sigma Lambda^{-1}`` where ``Sigma`` is the outer
product of the identification function and ``Lambda`` the Jacobian of its
expectation, both replaced by sample analogues at the estimate:

* ``F_t(g^q) - alpha`` becomes the realized ``1{y <= g^q} - alpha``;
* the conditional density ``f_t(g^q)`` becomes a Gaussian kernel estimate
  ``phi(r_t / h) / h`` at the quantile residual ``r_t = y - g^q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DomainError, ForecastSet, NumericError
from .links import LinkSpec, link_gradient, link_hessian
from .mestim import JOINT_OR_AUX, Theta, _check_mode

__all__ = [
    "SingularLambda",
    "VcovOptions",
    "SandwichCov",
    "link_terms",
    "psi_matrix",
    "sigma_hat",
    "mad_bandwidth",
    "lambda_hat",
    "lambda_from_terms",
    "omega_hat",
    "sandwich",
    "quantile_sandwich",
]

CONDITION_LIMIT = 1e12
TIE_TOL = 1e-9


class SingularLambda(NumericError):
    pass


@dataclass(frozen=True)
class VcovOptions:
    """``bandwidth=None`` selects the MAD rule; ``hac`` adds Newey-West weights."""

    bandwidth: Optional[float] = None
    hac: bool = False
    hac_lags: Optional[int] = None


@dataclass(frozen=True)
class SandwichCov:
    lambda_hat: np.ndarray
    sigma_hat: np.ndarray
    omega_hat: np.ndarray
    bandwidth: float


def _vec(theta) -> np.ndarray:
    return theta.vector() if isinstance(theta, Theta) else np.asarray(theta, dtype=float).reshape(-1)


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def link_terms(fs: ForecastSet, spec_q: LinkSpec, spec_e: LinkSpec, mode: str, theta) -> dict:
    """Link values, gradients and Hessians at ``theta`` for every observation."""
    _check_mode(fs, mode)
    v = _vec(theta)
    beta, eta = v[:spec_q.k], v[spec_q.k:]
    fq1, fq2 = (fs.q1, fs.q2) if mode == JOINT_OR_AUX else (fs.e1, fs.e2)
    oq, Xq = spec_q.design(fq1, fq2)
    oe, Xe = spec_e.design(fs.e1, fs.e2)
    gq = oq + Xq @ beta
    ge = oe + Xe @ eta
    if np.any(ge >= 0):
        raise DomainError("ES link is not negative at the supplied parameter")
    return dict(
        gq=gq, ge=ge,
        grad_q=link_gradient(spec_q, fq1, fq2, beta),
        grad_e=link_gradient(spec_e, fs.e1, fs.e2, eta),
        hess_q=link_hessian(spec_q, fq1, fq2, beta),
        hess_e=link_hessian(spec_e, fs.e1, fs.e2, eta),
    )


def _psi_from_terms(y, gq, ge, grad_q, grad_e, alpha):
    hit = (y <= gq).astype(float)
    wq = -(hit - alpha) / (alpha * ge)
    we = (ge - gq + (gq - y) * hit / alpha) / ge**2
    return np.hstack([grad_q * wq[:, None], grad_e * we[:, None]])


def psi_matrix(fs, spec_q, spec_e, mode, theta) -> np.ndarray:
    """Identification function at ``theta``, one row per observation (n, k)."""
    t = link_terms(fs, spec_q, spec_e, mode, theta)
    return _psi_from_terms(fs.y, t["gq"], t["ge"], t["grad_q"], t["grad_e"], fs.alpha)


def _outer_mean(p: np.ndarray, hac: bool = False, lags: Optional[int] = None) -> np.ndarray:
    n = p.shape[0]
    s = p.T @ p / n
    if hac:
        L = int(np.floor(n ** 0.2)) if lags is None else int(lags)
        for lag in range(1, min(L, n - 1) + 1):
            g = p[lag:].T @ p[:-lag] / n
            s += (1.0 - lag / (L + 1.0)) * (g + g.T)
    return _sym(s)


def sigma_hat(fs, spec_q, spec_e, mode, theta, hac: bool = False, hac_lags: Optional[int] = None) -> np.ndarray:
    """Sample mean of ``psi_t psi_t'`` (Newey-West weighted when ``hac``)."""
    return _outer_mean(psi_matrix(fs, spec_q, spec_e, mode, theta), hac, hac_lags)


def mad_bandwidth(residuals) -> float:
    """``n^(-1/3) * MAD(r) / 0.6745``, falling back to the standard deviation."""
    r = np.asarray(residuals, dtype=float)
    n = r.shape[0]
    scale = np.median(np.abs(r - np.median(r))) / 0.6745
    if not scale > 0:
        scale = np.std(r)
    h = n ** (-1.0 / 3.0) * scale
    if not h > 0:
        raise SingularLambda("quantile residuals are degenerate; no positive bandwidth")
    return float(h)


def lambda_from_terms(y, gq, ge, grad_q, grad_e, hess_q, hess_e, alpha, bandwidth) -> np.ndarray:
    """Sample Jacobian of the expected identification function.

    Blocks (time averages)::

        qq: -[H^q (I - a) + grad_q grad_q' fh] / (a g^e)
        qe:  grad_q grad_e' (I - a) / (a g^e^2)
        ee:  grad_e grad_e' / g^e^2 + (H^e / g^e^2 - 2 grad_e grad_e' / g^e^3) * inner

    with ``I = 1{y <= g^q}``, ``fh`` the kernel density at the quantile
    residual and ``inner = g^e - g^q + (g^q - y) I / a``.
    """
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    a = alpha
    hit = (y <= gq).astype(float)
    u = (y - gq) / bandwidth
    fh = np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi) / bandwidth
    inner = ge - gq + (gq - y) * hit / a

    wq_dens = -fh / (a * ge)
    wq_hess = -(hit - a) / (a * ge)
    lqq = (grad_q * wq_dens[:, None]).T @ grad_q / n
    lqq += np.tensordot(wq_hess, hess_q, axes=(0, 0)) / n
    lqe = (grad_q * ((hit - a) / (a * ge**2))[:, None]).T @ grad_e / n
    w1 = 1.0 / ge**2 - 2.0 * inner / ge**3
    lee = (grad_e * w1[:, None]).T @ grad_e / n
    lee += np.tensordot(inner / ge**2, hess_e, axes=(0, 0)) / n
    lam = np.block([[lqq, lqe], [lqe.T, lee]])
    return _sym(lam)


def lambda_hat(fs, spec_q, spec_e, mode, theta, bandwidth: Optional[float] = None) -> np.ndarray:
    """Plug-in estimate of Lambda at ``theta``; bandwidth defaults to the MAD rule."""
    t = link_terms(fs, spec_q, spec_e, mode, theta)
    h = mad_bandwidth(fs.y - t["gq"]) if bandwidth is None else float(bandwidth)
    return lambda_from_terms(fs.y, t["gq"], t["ge"], t["grad_q"], t["grad_e"],
                             t["hess_q"], t["hess_e"], fs.alpha, h)


def omega_hat(lam, sig) -> np.ndarray:
    """``Lambda^{-1} Sigma Lambda^{-1}`` via linear solves, symmetrized.

    Raises SingularLambda when the condition number of Lambda exceeds 1e12.
    """
    lam = np.asarray(lam, dtype=float)
    sig = np.asarray(sig, dtype=float)
    if not np.all(np.isfinite(lam)) or np.linalg.cond(lam) > CONDITION_LIMIT:
        raise SingularLambda("Lambda is singular or ill-conditioned; parameters not identified")
    a = np.linalg.solve(lam, sig)
    return _sym(np.linalg.solve(lam, a.T).T)


def sandwich(fs, spec_q, spec_e, mode, theta, options: VcovOptions = VcovOptions()) -> SandwichCov:
    t = link_terms(fs, spec_q, spec_e, mode, theta)
    h = mad_bandwidth(fs.y - t["gq"]) if options.bandwidth is None else float(options.bandwidth)
    lam = lambda_from_terms(fs.y, t["gq"], t["ge"], t["grad_q"], t["grad_e"],
                            t["hess_q"], t["hess_e"], fs.alpha, h)
    p = _psi_from_terms(fs.y, t["gq"], t["ge"], t["grad_q"], t["grad_e"], fs.alpha)
    sig = _outer_mean(p, options.hac, options.hac_lags)
    return SandwichCov(lambda_hat=lam, sigma_hat=sig, omega_hat=omega_hat(lam, sig), bandwidth=h)


def quantile_sandwich(fs: ForecastSet, spec_q: LinkSpec, beta, options: VcovOptions = VcovOptions()) -> SandwichCov:
    """Quantile-regression sandwich for the VaR-only combination.

    ``Lambda = mean(fh_t x_t x_t')``, ``Sigma = mean(psi_t psi_t')`` with
    ``psi_t = x_t (1{y <= g^q} - alpha)``.
    """
    beta = _vec(beta)
    oq, X = spec_q.design(fs.q1, fs.q2)
    gq = oq + X @ beta
    r = fs.y - gq
    h = mad_bandwidth(r) if options.bandwidth is None else float(options.bandwidth)
    n = fs.n
    u = r / h
    fh = np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi) / h
    lam = _sym((X * fh[:, None]).T @ X / n)
    # the LP solution interpolates k observations exactly; count them as hits
    # regardless of rounding so the statistic does not depend on the data scale
    tie = TIE_TOL * float(np.mean(np.abs(fs.y)))
    p = X * ((r <= tie).astype(float) - fs.alpha)[:, None]
    sig = _outer_mean(p, options.hac, options.hac_lags)
    return SandwichCov(lambda_hat=lam, sigma_hat=sig, omega_hat=omega_hat(lam, sig), bandwidth=h)
