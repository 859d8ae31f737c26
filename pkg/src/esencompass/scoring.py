"""Loss functions for (VaR, ES) and the quantile, plus the FZ0 identification function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError

__all__ = ["fz0_loss", "tick_loss", "psi", "PsiValue"]


def fz0_loss(y, q, e, alpha):
    """Zero-homogeneous joint loss for the pair (VaR, ES).

    ``-(1/e) * (e - q + (q - y) * 1{y <= q} / alpha) + log(-e)``

    Broadcasts over array arguments. Raises DomainError if any ``e >= 0``.
    """
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(e >= 0):
        raise DomainError("ES argument of the FZ0 loss must be strictly negative")
    hit = (y <= q).astype(float)
    out = -(1.0 / e) * (e - q + (q - y) * hit / alpha) + np.log(-e)
    return out[()] if out.ndim == 0 else out


def tick_loss(y, q, alpha):
    """Quantile check loss ``(1{y <= q} - alpha) * (q - y)``; always >= 0."""
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    out = ((y <= q).astype(float) - alpha) * (q - y)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PsiValue:
    """Quantile block and ES block of the identification function."""

    psi_q: np.ndarray
    psi_e: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.psi_q, self.psi_e], axis=-1)


def psi(y, q, e, grad_q, grad_e, alpha) -> PsiValue:
    """Identification function: a.s. gradient of the FZ0 loss in the parameters.

    Parameters
    ----------
    y, q, e : float or ndarray of shape (n,)
        Realization and the link values ``g^q``, ``g^e`` at the parameter.
    grad_q, grad_e : ndarray of shape (k_q,) / (k_e,) or (n, k_q) / (n, k_e)
        Link gradients with respect to the quantile / ES parameter blocks.
    alpha : float

    Returns
    -------
    PsiValue
        Blocks of shape (k,) for scalar inputs or (n, k) for vectors.
    """
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(e >= 0):
        raise DomainError("ES link value must be strictly negative")
    gq = np.asarray(grad_q, dtype=float)
    ge = np.asarray(grad_e, dtype=float)
    hit = (y <= q).astype(float)
    wq = -(hit - alpha) / (alpha * e)
    we = (e - q + (q - y) * hit / alpha) / e**2
    return PsiValue(psi_q=gq * wq[..., None], psi_e=ge * we[..., None])
