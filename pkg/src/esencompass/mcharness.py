"""Monte Carlo size and power experiments.

A plan crosses sample sizes with combination weights. Every replication
simulates one path, runs each test variant in both directions and stores
the statistics and p-values; rejection frequencies for all nominal levels
are computed from those records. Replication seeds depend only on
``(base_seed, cell index, replication index)``, so results do not depend
on the number of workers or on the order in which tasks finish.

Per-replication records can be kept in a JSON-lines store, which makes
runs resumable and lets callers reuse the raw p-values.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import EncompassingError, NumericError
from .dgps import DgpSpec, simulate
from .encompassing import VARIANTS, TestOptions, run_tests

__all__ = [
    "CSV_COLUMNS",
    "ExcessiveFailures",
    "ExperimentPlan",
    "RepRecord",
    "PlanResult",
    "rep_seed",
    "run_replication",
    "run_plan",
]

CSV_COLUMNS = ("dgp", "n", "pi", "variant", "direction", "level", "freq", "se", "failures")
MAX_FAILURE_RATE = 0.20


class ExcessiveFailures(NumericError):
    """More than 20% of the replications in a cell failed."""


@dataclass(frozen=True)
class ExperimentPlan:
    """Grid of Monte Carlo cells.

    ``dgp`` is a template; its ``n``, ``pi`` and ``seed`` are replaced per
    replication.
    """

    dgp: DgpSpec
    n_grid: Tuple[int, ...] = (1000,)
    pi_grid: Tuple[float, ...] = (0.0,)
    n_reps: int = 500
    level_grid: Tuple[float, ...] = (0.01, 0.05, 0.10)
    variants: Tuple[str, ...] = VARIANTS
    directions: Tuple[int, ...] = (1, 2)
    base_seed: int = 0
    options: TestOptions = field(default_factory=TestOptions)

    def __post_init__(self):
        for name in ("n_grid", "pi_grid", "level_grid", "variants", "directions"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if not (self.n_grid and self.pi_grid and self.level_grid and self.variants and self.directions):
            raise ValueError("plan grids must be non-empty")
        if any(not 0.0 < a < 1.0 for a in self.level_grid):
            raise ValueError("levels must lie in (0, 1)")

    def cells(self) -> List[Tuple[int, int, float]]:
        """``(cell index, n, pi)`` in a fixed order: n outer, pi inner."""
        out = []
        for n in self.n_grid:
            for pi in self.pi_grid:
                out.append((len(out), int(n), float(pi)))
        return out

    def fingerprint(self) -> str:
        d = asdict(self.dgp)
        d.pop("n"), d.pop("pi"), d.pop("seed")
        return json.dumps({"dgp": d, "variants": list(self.variants), "directions": list(self.directions),
                           "base_seed": self.base_seed, "options": repr(self.options)}, sort_keys=True)


@dataclass(frozen=True)
class RepRecord:
    """Outcome of one replication.

    ``results`` maps ``"variant/direction"`` to ``(statistic, p_value)`` or
    to the name of the error that prevented the test.
    """

    cell: int
    rep: int
    results: Dict[str, object]

    def to_json(self) -> str:
        return json.dumps({"cell": self.cell, "rep": self.rep, "results": self.results}, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RepRecord":
        d = json.loads(line)
        res = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d["results"].items()}
        return cls(int(d["cell"]), int(d["rep"]), res)


def rep_seed(base_seed: int, cell: int, rep: int) -> Tuple[int, int, int]:
    """Entropy for one replication's random streams."""
    return (int(base_seed), int(cell), int(rep))


def _key(variant: str, direction: int) -> str:
    return f"{variant}/{direction}"


def run_replication(plan: ExperimentPlan, cell: int, n: int, pi: float, rep: int) -> RepRecord:
    spec = replace(plan.dgp, n=n, pi=pi, seed=rep_seed(plan.base_seed, cell, rep))
    keys = [_key(v, d) for v in plan.variants for d in plan.directions]
    try:
        fs = simulate(spec)
    except EncompassingError as exc:
        return RepRecord(cell, rep, {k: type(exc).__name__ for k in keys})
    reports = run_tests(fs, plan.variants, plan.directions, plan.options)
    out: Dict[str, object] = {}
    for (variant, direction), r in reports.items():
        if isinstance(r, EncompassingError):
            out[_key(variant, direction)] = type(r).__name__
        else:
            out[_key(variant, direction)] = (float(r.statistic), float(r.p_value))
    return RepRecord(cell, rep, out)


def _task(args):
    plan, cell, n, pi, rep = args
    return run_replication(plan, cell, n, pi, rep)


@dataclass
class PlanResult:
    plan: ExperimentPlan
    records: Dict[Tuple[int, int], RepRecord]

    def pvalues(self, n: int, pi: float, variant: str, direction: int) -> np.ndarray:
        """p-values of the successful replications of one cell, in replication order."""
        return self._column(n, pi, variant, direction, 1)

    def statistics(self, n: int, pi: float, variant: str, direction: int) -> np.ndarray:
        return self._column(n, pi, variant, direction, 0)

    def _cell_index(self, n, pi) -> int:
        for c, cn, cp in self.plan.cells():
            if cn == int(n) and cp == float(pi):
                return c
        raise KeyError((n, pi))

    def _column(self, n, pi, variant, direction, j) -> np.ndarray:
        c = self._cell_index(n, pi)
        key = _key(variant, direction)
        vals = []
        for rep in range(self.plan.n_reps):
            v = self.records[(c, rep)].results.get(key)
            if isinstance(v, tuple):
                vals.append(v[j])
        return np.array(vals, dtype=float)

    def rows(self) -> List[dict]:
        out = []
        for c, n, pi in self.plan.cells():
            for variant in self.plan.variants:
                for direction in self.plan.directions:
                    p = self.pvalues(n, pi, variant, direction)
                    failures = self.plan.n_reps - p.shape[0]
                    for level in self.plan.level_grid:
                        if p.shape[0]:
                            freq = float(np.mean(p <= level))
                            se = float(np.sqrt(freq * (1.0 - freq) / p.shape[0]))
                        else:
                            freq = se = float("nan")
                        out.append(dict(dgp=self.plan.dgp.family, n=n, pi=pi, variant=variant,
                                        direction=direction, level=level, freq=freq, se=se,
                                        failures=failures))
        return out

    def to_csv(self, path: Optional[str] = None) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows():
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _load_store(path: str, plan: ExperimentPlan) -> Dict[Tuple[int, int], RepRecord]:
    if not os.path.exists(path):
        return {}
    out = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header or json.loads(header).get("fingerprint") != plan.fingerprint():
            raise ValueError(f"store {path!r} belongs to a different plan")
        for line in fh:
            line = line.strip()
            if line:
                r = RepRecord.from_json(line)
                out[(r.cell, r.rep)] = r
    return out


def run_plan(plan: ExperimentPlan, workers: int = 1, store: Optional[str] = None,
             progress: Optional[Callable[[str], None]] = None) -> PlanResult:
    """Run every cell of ``plan`` and collect the replication records.

    Parameters
    ----------
    workers : int
        Number of worker processes; 1 runs in-process.
    store : str, optional
        JSON-lines file of finished replications. Existing records are
        reused, new ones appended.
    progress : callable, optional
        Receives one line of text per finished cell.

    Raises
    ------
    ExcessiveFailures
        If more than 20% of the replications of a cell failed for any test.
    """
    records: Dict[Tuple[int, int], RepRecord] = {}
    fh = None
    if store is not None:
        records = _load_store(store, plan)
        new = not os.path.exists(store)
        fh = open(store, "a", encoding="utf-8")
        if new:
            fh.write(json.dumps({"fingerprint": plan.fingerprint()}) + "\n")
    cells = plan.cells()
    todo = [(plan, c, n, pi, rep) for c, n, pi in cells for rep in range(plan.n_reps)
            if (c, rep) not in records]
    remaining = {c: sum(1 for t in todo if t[1] == c) for c, _, _ in cells}
    try:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                it = ex.map(_task, todo, chunksize=max(1, min(8, len(todo) // (4 * workers))))
                for rec in it:
                    _collect(rec, records, fh, remaining, cells, progress)
        else:
            for t in todo:
                _collect(_task(t), records, fh, remaining, cells, progress)
    finally:
        if fh is not None:
            fh.close()
    result = PlanResult(plan, records)
    for r in result.rows():
        if r["failures"] > MAX_FAILURE_RATE * plan.n_reps:
            raise ExcessiveFailures(
                f"{r['failures']} of {plan.n_reps} replications failed in cell "
                f"n={r['n']}, pi={r['pi']}, {r['variant']}/{r['direction']}")
    return result


def _collect(rec, records, fh, remaining, cells, progress):
    records[(rec.cell, rec.rep)] = rec
    if fh is not None:
        fh.write(rec.to_json() + "\n")
        fh.flush()
    remaining[rec.cell] -= 1
    if remaining[rec.cell] == 0 and progress is not None:
        _, n, pi = cells[rec.cell]
        progress(f"cell {rec.cell}: n={n} pi={pi} done")


def stderr_progress(line: str) -> None:
    print(line, file=sys.stderr, flush=True)
