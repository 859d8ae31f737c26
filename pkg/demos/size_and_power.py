"""A desk-sized Monte Carlo: rejection rates of H01 along the mixing weight.

At pi = 0 the first forecaster is correct, so the rejection rate estimates
the size; as pi grows the second model takes over and the rate measures
power. Increase ``REPS`` for smoother curves (the acceptance suite uses 500).
"""

from __future__ import annotations

import sys

from esencompass import DgpSpec, ExperimentPlan, run_plan
from esencompass.encompassing import AUX, STRICT_ES

REPS = 40


def main(workers: int = 1):
    plan = ExperimentPlan(DgpSpec("GarchCombo"), n_grid=(1000,), pi_grid=(0.0, 0.5, 1.0), n_reps=REPS,
                          level_grid=(0.05,), variants=(STRICT_ES, AUX), directions=(1,), base_seed=1)
    res = run_plan(plan, workers=workers)
    print(f"{'pi':>5} {'variant':<9} {'reject@5%':>10} {'se':>6}")
    for row in res.rows():
        print(f"{row['pi']:5.2f} {row['variant']:<9} {row['freq']:10.3f} {row['se']:6.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1)
