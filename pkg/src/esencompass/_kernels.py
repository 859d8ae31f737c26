"""Compiled inner loops: Nelder-Mead simplex and the penalized FZ0 objectives."""

from __future__ import annotations

import numpy as np
from numba import njit

PENALTY = 1e10
FEASIBILITY_MARGIN = -1e-8
LOG_BLOCK = 16


@njit(cache=True)
def nelder_mead(fun, x0, step, args, ftol, max_evals):
    """Minimize ``fun(x, args)`` from an axis-aligned simplex around ``x0``.

    Stops when the spread of objective values over the simplex is at most
    ``ftol`` or after ``max_evals`` evaluations. Returns
    ``(x, f, n_evals, converged)``.
    """
    k = x0.shape[0]
    sim = np.empty((k + 1, k))
    fs = np.empty(k + 1)
    sim[0] = x0
    for i in range(k):
        sim[i + 1] = x0
        sim[i + 1, i] += step[i]
    for i in range(k + 1):
        fs[i] = fun(sim[i], args)
    nev = k + 1
    converged = False
    xbar = np.empty(k)
    while True:
        order = np.argsort(fs, kind="mergesort")
        sim = sim[order]
        fs = fs[order]
        if fs[k] - fs[0] <= ftol:
            converged = True
            break
        if nev >= max_evals:
            break
        for j in range(k):
            s = 0.0
            for i in range(k):
                s += sim[i, j]
            xbar[j] = s / k
        xr = 2.0 * xbar - sim[k]
        fr = fun(xr, args)
        nev += 1
        if fr < fs[0]:
            xe = 3.0 * xbar - 2.0 * sim[k]
            fe = fun(xe, args)
            nev += 1
            if fe < fr:
                sim[k] = xe
                fs[k] = fe
            else:
                sim[k] = xr
                fs[k] = fr
            continue
        if fr < fs[k - 1]:
            sim[k] = xr
            fs[k] = fr
            continue
        shrink = False
        if fr < fs[k]:
            xc = 1.5 * xbar - 0.5 * sim[k]
            fc = fun(xc, args)
            nev += 1
            if fc <= fr:
                sim[k] = xc
                fs[k] = fc
            else:
                shrink = True
        else:
            xcc = 0.5 * xbar + 0.5 * sim[k]
            fcc = fun(xcc, args)
            nev += 1
            if fcc < fs[k]:
                sim[k] = xcc
                fs[k] = fcc
            else:
                shrink = True
        if shrink:
            for i in range(1, k + 1):
                sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                fs[i] = fun(sim[i], args)
                nev += 1
    return sim[0].copy(), fs[0], nev, converged


@njit(cache=True, fastmath=True)
def fz0_combo_objective(theta, args):
    """Mean FZ0 loss of the affine combination, or a penalty when infeasible.

    ``args = (y, oq, Xq, oe, Xe, alpha, bound, enforce_order)`` with
    ``g^q = oq + Xq @ beta`` and ``g^e = oe + Xe @ eta``. The design matrices
    should be Fortran-ordered and the data on a unit scale: log(-g^e) is
    accumulated as products over blocks of ``LOG_BLOCK`` observations.
    """
    y, oq, Xq, oe, Xe, alpha, bound, enforce_order = args
    n = y.shape[0]
    kq = Xq.shape[1]
    ke = Xe.shape[1]
    pen = 0.0
    for j in range(kq + ke):
        a = abs(theta[j])
        if a > bound:
            pen += 1.0 + a - bound
    gq = oq.copy()
    ge = oe.copy()
    for j in range(kq):
        b = theta[j]
        for t in range(n):
            gq[t] += Xq[t, j] * b
    for j in range(ke):
        b = theta[kq + j]
        for t in range(n):
            ge[t] += Xe[t, j] * b
    for t in range(n):
        if ge[t] >= FEASIBILITY_MARGIN:
            pen += 1.0 + ge[t] - FEASIBILITY_MARGIN
        elif enforce_order and ge[t] > gq[t]:
            pen += 1.0 + ge[t] - gq[t]
    if pen > 0.0:
        return PENALTY * (1.0 + pen)
    inv_alpha = 1.0 / alpha
    total = 0.0
    for t in range(n):
        hit = 1.0 if y[t] <= gq[t] else 0.0
        total += -(ge[t] - gq[t] + (gq[t] - y[t]) * hit * inv_alpha) / ge[t]
    logsum = 0.0
    for b0 in range(0, n, LOG_BLOCK):
        prod = 1.0
        for t in range(b0, min(n, b0 + LOG_BLOCK)):
            prod *= -ge[t]
        logsum += np.log(prod)
    return (total + logsum) / n


@njit(cache=True)
def fz0_path_loss(y, q, e, alpha):
    """Mean FZ0 loss of forecast paths; inf if any ES forecast is not negative or q < e."""
    n = y.shape[0]
    total = 0.0
    for t in range(n):
        if not (e[t] < 0.0) or q[t] < e[t] or not np.isfinite(q[t]):
            return np.inf
        if y[t] <= q[t]:
            inner = e[t] - q[t] + (q[t] - y[t]) / alpha
        else:
            inner = e[t] - q[t]
        total += -inner / e[t] + np.log(-e[t])
    return total / n
