"""Monte Carlo plans behind the acceptance suite.

Plans are defined once here so the acceptance tests and the precompute
entry point (``python3 tests/acceptance_plans.py``) agree on fingerprints.
Finished replications are cached as JSON-lines stores under
``tests/mc_cache`` (override with ``ESENCOMPASS_MC_CACHE``); an interrupted
run resumes where it stopped.
"""

from __future__ import annotations

import os
import sys
import time

from esencompass.dgps import FAMILIES, DgpSpec
from esencompass.encompassing import AUX, STRICT_ES, VARIANTS
from esencompass.mcharness import ExperimentPlan, run_plan

CACHE = os.environ.get("ESENCOMPASS_MC_CACHE", os.path.join(os.path.dirname(__file__), "mc_cache"))

SIZE_REPS = 500
ORDER_REPS = 500
POWER_REPS = 500
POWER_PIS = (0.0, 0.25, 0.5, 0.75, 1.0)


def size_plan(family: str, pi: float) -> ExperimentPlan:
    # the null holds for H0(1) at pi=0 and for H0(2) at pi=1
    direction = 1 if pi == 0.0 else 2
    return ExperimentPlan(DgpSpec(family), n_grid=(4000,), pi_grid=(pi,), n_reps=SIZE_REPS,
                          variants=(STRICT_ES, AUX), directions=(direction,), base_seed=101)


def order_plan(family: str) -> ExperimentPlan:
    return ExperimentPlan(DgpSpec(family), n_grid=(1000,), pi_grid=(0.0,), n_reps=ORDER_REPS,
                          variants=VARIANTS, directions=(1,), base_seed=202)


def power_plan() -> ExperimentPlan:
    return ExperimentPlan(DgpSpec("GarchCombo"), n_grid=(2000,), pi_grid=POWER_PIS, n_reps=POWER_REPS,
                          variants=(STRICT_ES,), directions=(1,), base_seed=303)


def power_plan_large() -> ExperimentPlan:
    return ExperimentPlan(DgpSpec("GarchCombo"), n_grid=(4000,), pi_grid=(1.0,), n_reps=POWER_REPS,
                          variants=(STRICT_ES,), directions=(1,), base_seed=303)


def all_plans():
    """``(name, plan)`` pairs in the order the precompute runs them."""
    out = [("power_n2000", power_plan()), ("power_n4000", power_plan_large())]
    for fam in FAMILIES:
        out.append((f"order_{fam}", order_plan(fam)))
    for fam in FAMILIES:
        for pi in (0.0, 1.0):
            out.append((f"size_{fam}_pi{int(pi)}", size_plan(fam, pi)))
    return out


def store_path(name: str) -> str:
    return os.path.join(CACHE, f"{name}.jsonl")


def load(name: str, plan: ExperimentPlan, workers: int = 1):
    os.makedirs(CACHE, exist_ok=True)
    return run_plan(plan, workers=workers, store=store_path(name))


if __name__ == "__main__":
    workers = int(sys.argv[1]) if len(sys.argv) > 1 else (os.cpu_count() or 1)
    only = set(sys.argv[2:])
    for name, plan in all_plans():
        if only and name not in only:
            continue
        t0 = time.time()
        try:
            load(name, plan, workers)
            status = "ok"
        except Exception as exc:  # keep going; the acceptance test reports it
            status = f"{type(exc).__name__}: {exc}"
        print(f"{name}: {time.time() - t0:.0f}s {status}", flush=True)
