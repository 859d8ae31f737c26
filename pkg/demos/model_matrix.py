"""Pairwise encompassing tests between fitted forecasting models.

Returns are simulated from a GJR-GARCH with Student-t innovations, the
models are estimated once on the first 1000 observations and the remaining
observations are forecast with frozen parameters. The output mirrors an
empirical study: one p-value matrix per variant and the frequency of each
decision per model.
"""

from __future__ import annotations

import numpy as np

from esencompass import ModelSpec, pairwise_matrix
from esencompass.dgps import GJR_PARAMS
from esencompass.encompassing import STRICT_ES

MODELS = ("HistSim", "RiskMetrics", "GjrGarchT", "Gas1F", "EsCaviarSAV")


def gjr_t_returns(n, seed=3, nu=6.0):
    rng = np.random.default_rng(seed)
    om, a, g, b = GJR_PARAMS
    v = om / (1 - a - 0.5 * g - b)
    y = np.empty(n)
    for t in range(n):
        y[t] = np.sqrt(v) * rng.standard_t(nu) * np.sqrt((nu - 2) / nu)
        v = om + (a + (g if y[t] <= 0 else 0.0)) * y[t] ** 2 + b * v
    return y


def main():
    y = gjr_t_returns(3000)
    res = pairwise_matrix(y, 1000, [ModelSpec(k) for k in MODELS], [STRICT_ES], level=0.10)
    names = res.models
    print("strict ES test, p-value of 'row encompasses column'")
    print(" " * 12 + "".join(f"{n:>12}" for n in names))
    for i, n in enumerate(names):
        cells = ["" if i == j else ("NA" if np.isnan(p) else f"{p:.3f}") for j, p in enumerate(res.pvalues[STRICT_ES][i])]
        print(f"{n:<12}" + "".join(f"{c:>12}" for c in cells))
    print("\noutcome frequencies at the 10% level")
    for n, fr in res.frequencies(STRICT_ES).items():
        print(f"  {n:<12} " + "  ".join(f"{k} {v:.2f}" for k, v in fr.items()))
    for (i, j), why in sorted(res.reasons[STRICT_ES].items()):
        print(f"  NA {names[i]} / {names[j]}: {why}")


if __name__ == "__main__":
    main()
