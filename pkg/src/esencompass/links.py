"""Combination ("link") functions mapping two forecasts and parameters to one forecast.

Every supported kind is affine in its parameters, so each link can also be
written as ``offset + X @ theta``. The estimator works on that affine form;
value, gradient and Hessian are exposed for inference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import DimensionMismatch

__all__ = [
    "LINEAR_INTERCEPT",
    "LINEAR_NO_INTERCEPT",
    "CONVEX_WEIGHTS",
    "ANCHORED_OFFSET",
    "LinkSpec",
    "parse_link",
    "link_value",
    "link_gradient",
    "link_hessian",
]

LINEAR_INTERCEPT = "LinearIntercept"
LINEAR_NO_INTERCEPT = "LinearNoIntercept"
CONVEX_WEIGHTS = "ConvexWeights"
ANCHORED_OFFSET = "AnchoredOffset"
_KINDS = (LINEAR_INTERCEPT, LINEAR_NO_INTERCEPT, CONVEX_WEIGHTS, ANCHORED_OFFSET)


@dataclass(frozen=True)
class LinkSpec:
    """A link kind, optionally with a free intercept.

    ========================  =========================================  =========
    kind                      g(f1, f2, theta)                           theta_0
    ========================  =========================================  =========
    LinearIntercept           t1 + t2*f1 + t3*f2                         (0, 1, 0)
    LinearNoIntercept         t1*f1 + t2*f2                              (1, 0)
    ConvexWeights             t1*f1 + (1 - t1)*f2                        (1,)
    ConvexWeights+intercept   t1 + t2*f1 + (1 - t2)*f2                   (0, 1)
    AnchoredOffset            f1 + t1*f2                                 (0,)
    AnchoredOffset+intercept  t1 + f1 + t2*f2                            (0, 0)
    ========================  =========================================  =========
    """

    kind: str = LINEAR_INTERCEPT
    intercept: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind == LINEAR_INTERCEPT:
            object.__setattr__(self, "intercept", True)
        elif self.kind == LINEAR_NO_INTERCEPT:
            object.__setattr__(self, "intercept", False)

    @property
    def k(self) -> int:
        base = {LINEAR_INTERCEPT: 2, LINEAR_NO_INTERCEPT: 2, CONVEX_WEIGHTS: 1, ANCHORED_OFFSET: 1}[self.kind]
        return base + int(self.intercept)

    @property
    def intercept_index(self) -> Optional[int]:
        return 0 if self.intercept else None

    def null_value(self, direction: int = 1) -> Optional[np.ndarray]:
        """Parameter at which the link reproduces forecast ``direction``.

        Returns None when the kind cannot reproduce the second forecast
        (AnchoredOffset); callers then exchange the forecasters instead.
        """
        head = [0.0] if self.intercept else []
        if self.kind in (LINEAR_INTERCEPT, LINEAR_NO_INTERCEPT):
            tail = [1.0, 0.0] if direction == 1 else [0.0, 1.0]
        elif self.kind == CONVEX_WEIGHTS:
            tail = [1.0] if direction == 1 else [0.0]
        else:
            if direction != 1:
                return None
            tail = [0.0]
        return np.array(head + tail)

    def design(self, f1, f2) -> Tuple[np.ndarray, np.ndarray]:
        """Affine representation: returns ``(offset, X)`` with ``g = offset + X @ theta``."""
        f1 = np.asarray(f1, dtype=float)
        f2 = np.asarray(f2, dtype=float)
        cols = [np.ones_like(f1)] if self.intercept else []
        if self.kind in (LINEAR_INTERCEPT, LINEAR_NO_INTERCEPT):
            cols += [f1, f2]
            offset = np.zeros_like(f1)
        elif self.kind == CONVEX_WEIGHTS:
            cols += [f1 - f2]
            offset = f2.copy()
        else:
            cols += [f2]
            offset = f1.copy()
        return offset, np.stack(cols, axis=-1)

    def label(self) -> str:
        if self.intercept and self.kind in (CONVEX_WEIGHTS, ANCHORED_OFFSET):
            return self.kind + "+intercept"
        return self.kind


def parse_link(text: str) -> LinkSpec:
    """Parse a config string such as ``"LinearIntercept"`` or ``"convex+intercept"``."""
    t = text.strip().replace("_", "").replace("-", "").lower()
    intercept = t.endswith("+intercept")
    t = t.replace("+intercept", "")
    aliases = {
        "linearintercept": LINEAR_INTERCEPT, "linear": LINEAR_INTERCEPT,
        "linearnointercept": LINEAR_NO_INTERCEPT, "nointercept": LINEAR_NO_INTERCEPT,
        "convexweights": CONVEX_WEIGHTS, "convex": CONVEX_WEIGHTS,
        "anchoredoffset": ANCHORED_OFFSET, "anchored": ANCHORED_OFFSET,
    }
    if t not in aliases:
        raise ValueError(f"unknown link specification {text!r}")
    return LinkSpec(aliases[t], intercept)


def _check(spec: LinkSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != spec.k:
        raise DimensionMismatch(f"{spec.label()} expects {spec.k} parameters, got {theta.shape[0]}")
    return theta


def link_value(spec: LinkSpec, f1, f2, theta):
    """Combined forecast ``g(f1, f2, theta)``; broadcasts over forecast arrays."""
    theta = _check(spec, theta)
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    i = 1 if spec.intercept else 0
    c = theta[0] if spec.intercept else 0.0
    if spec.kind in (LINEAR_INTERCEPT, LINEAR_NO_INTERCEPT):
        out = c + theta[i] * f1 + theta[i + 1] * f2
    elif spec.kind == CONVEX_WEIGHTS:
        out = c + theta[i] * f1 + (1.0 - theta[i]) * f2
    else:
        out = c + f1 + theta[i] * f2
    return out[()] if np.ndim(out) == 0 else out


def link_gradient(spec: LinkSpec, f1, f2, theta):
    """Gradient in theta; shape (k,) for scalar forecasts, (n, k) for arrays."""
    _check(spec, theta)
    _, X = spec.design(f1, f2)
    return X


def link_hessian(spec: LinkSpec, f1, f2, theta):
    """Hessian in theta; identically zero for the affine kinds."""
    _check(spec, theta)
    shape = np.shape(np.asarray(f1, dtype=float) + np.asarray(f2, dtype=float))
    return np.zeros(shape + (spec.k, spec.k))
