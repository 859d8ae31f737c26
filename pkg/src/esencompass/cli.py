"""Command-line interface.

Subcommands
-----------
test      encompassing tests for one pair of forecasters read from CSV
matrix    fit the forecasting models and tabulate all pairwise tests
mc        run a Monte Carlo experiment plan
simulate  write a simulated path as CSV

Exit codes: 0 success, 2 data or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import DataError, EncompassingError, ForecastSet, NumericError, make_forecast_set
from .dgps import FAMILIES, DgpSpec, simulate
from .encompassing import VARIANTS, TestOptions, TestReport, decide, parse_variant, run_tests
from .fcmodels import MODEL_KINDS, ModelSpec, pairwise_matrix
from .links import LinkSpec, parse_link
from .mcharness import ExperimentPlan, run_plan, stderr_progress
from .mestim import EstimatorOptions
from .vcov import VcovOptions

__all__ = ["main", "read_forecast_csv", "write_forecast_csv", "to_json", "build_parser"]

FORECAST_COLUMNS = ("t", "y", "q1", "e1", "q2", "e2")
SCHEMA_VERSION = 1


class ConfigError(DataError):
    pass


# --------------------------------------------------------------------------
# serialization


def _num(x) -> str:
    return "%.17g" % x


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats written to 17 significant digits (NaN as null)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}"{k}": {to_json(v, indent, _level + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent, _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return "null" if not math.isfinite(obj) else _num(float(obj))
    s = str(obj).replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{s}"'


def read_forecast_csv(path: str, alpha: float) -> ForecastSet:
    """Read ``t,y,q1,e1,q2,e2`` (VaR columns optional) into a validated ForecastSet."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        for need in ("y", "e1", "e2"):
            if need not in header:
                raise DataError(f"{path}: missing column {need!r}")
        has_q = "q1" in header or "q2" in header
        if has_q and not ("q1" in header and "q2" in header):
            raise DataError(f"{path}: VaR columns must include both q1 and q2")
        fields = ["y", "e1", "e2"] + (["q1", "q2"] if has_q else [])
        idx = {f: header.index(f) for f in fields}
        cols: Dict[str, List[float]] = {f: [] for f in fields}
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {row_no} has {len(row)} fields, expected {len(header)}")
            for f in fields:
                text = row[idx[f]].strip()
                try:
                    v = float(text)
                except ValueError:
                    raise DataError(f"{path}: line {row_no}, field {f!r}: {text!r} is not a number") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: line {row_no}, field {f!r} is not finite")
                cols[f].append(v)
    if not cols["y"]:
        raise DataError(f"{path}: no data rows")
    arr = {k: np.array(v) for k, v in cols.items()}
    return make_forecast_set(arr["y"], arr["e1"], arr["e2"], alpha,
                             arr.get("q1"), arr.get("q2"))


def write_forecast_csv(fs: ForecastSet, path: Optional[str] = None) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FORECAST_COLUMNS)
    for t in range(fs.n):
        w.writerow([t + 1, _num(fs.y[t]), _num(fs.q1[t]), _num(fs.e1[t]), _num(fs.q2[t]), _num(fs.e2[t])])
    text = buf.getvalue()
    _emit(text, path)
    return text


def _emit(text: str, path: Optional[str]):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _read_returns(path: str) -> np.ndarray:
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if "y" not in header:
            raise DataError(f"{path}: missing column 'y'")
        j = header.index("y")
        out = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                v = float(row[j])
            except (ValueError, IndexError):
                raise DataError(f"{path}: line {row_no}, field 'y' is not a number") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: line {row_no}, field 'y' is not finite")
            out.append(v)
    return np.array(out)


# --------------------------------------------------------------------------
# configuration


def _load_config(path: Optional[str]) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path} does not exist")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
    return cp


def _get(cp, section, key, conv=str, default=None):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"config [{section}] {key} = {raw!r} is invalid") from None


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _list(conv):
    return lambda text: tuple(conv(x.strip()) for x in text.replace(";", ",").split(",") if x.strip())


def _bandwidth(text: str) -> Optional[float]:
    return None if text.lower() in ("auto", "mad", "") else float(text)


def _test_options(cp) -> TestOptions:
    est = EstimatorOptions(
        seed=_get(cp, "estimator", "seed", int, 0),
        n_restarts=_get(cp, "estimator", "n_restarts", int, 10),
        tol=_get(cp, "estimator", "tol", float, 1e-8),
        max_evals=_get(cp, "estimator", "max_evals", int, 20000),
        bound=_get(cp, "estimator", "bound", float, 50.0),
    )
    vc = VcovOptions(
        bandwidth=_get(cp, "vcov", "bandwidth", _bandwidth, None),
        hac=_get(cp, "vcov", "hac", _bool, False),
        hac_lags=_get(cp, "vcov", "hac_lags", int, None),
    )
    try:
        spec_q = _get(cp, "links", "quantile", parse_link, LinkSpec())
        spec_e = _get(cp, "links", "es", parse_link, LinkSpec())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return TestOptions(spec_q=spec_q, spec_e=spec_e, estimator=est, vcov=vc,
                       restrict_intercepts=_get(cp, "links", "restrict_intercepts", _bool, False))


def _variants(text: str) -> List[str]:
    if text.strip().lower() == "all":
        return list(VARIANTS)
    try:
        return [parse_variant(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _directions(text: str) -> List[int]:
    t = text.strip().lower()
    if t in ("both", "all"):
        return [1, 2]
    if t in ("1", "2"):
        return [int(t)]
    raise ConfigError(f"direction must be 1, 2 or both, got {text!r}")


def _unit(name: str, v: float) -> float:
    if not 0.0 < v < 1.0:
        raise ConfigError(f"{name} must lie in (0, 1), got {v}")
    return v


def _pick(flag, cp, section, key, conv, default):
    return flag if flag is not None else _get(cp, section, key, conv, default)


def _dgp_spec(args, cp) -> DgpSpec:
    family = _pick(args.family, cp, "dgp", "family", str, "GarchCombo")
    if family not in FAMILIES:
        raise ConfigError(f"unknown DGP family {family!r}; choose from {', '.join(FAMILIES)}")
    try:
        return DgpSpec(
            family=family,
            pi=_pick(getattr(args, "pi", None), cp, "dgp", "pi", float, 0.0),
            n=_pick(getattr(args, "n", None), cp, "dgp", "n", int, 1000),
            burn_in=_get(cp, "dgp", "burn_in", int, 1000),
            seed=_pick(getattr(args, "seed", None), cp, "dgp", "seed", int, 0),
            alpha=_pick(args.alpha, cp, "dgp", "alpha", float, 0.025),
            flip_x_inequality=_get(cp, "dgp", "flip_x_inequality", _bool, False),
            strict_nu=_get(cp, "dgp", "strict_nu", _bool, False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# commands


def _report_entry(r, decision):
    if isinstance(r, EncompassingError):
        return None
    return {
        "variant": r.variant,
        "direction": r.direction,
        "theta_hat": {"beta": r.theta_hat.beta.tolist(), "eta": r.theta_hat.eta.tolist()},
        "statistic": r.statistic,
        "df": r.df,
        "p_value": r.p_value,
        "decision": decision,
    }


def cmd_test(args) -> int:
    cp = _load_config(args.config)
    alpha = _unit("alpha", _pick(args.alpha, cp, "test", "alpha", float, 0.025))
    level = _unit("level", _pick(args.level, cp, "test", "level", float, 0.10))
    variants = _variants(_pick(args.variant, cp, "test", "variant", str, "strict"))
    directions = _directions(_pick(args.direction, cp, "test", "direction", str, "both"))
    options = _test_options(cp)
    fs = read_forecast_csv(args.input, alpha)
    reports = run_tests(fs, variants, directions, options)
    results = []
    for v in variants:
        first_err = next((reports[(v, d)] for d in directions if isinstance(reports[(v, d)], EncompassingError)), None)
        if first_err is not None:
            raise first_err
        decision = None
        if len(directions) == 2:
            decision = decide(reports[(v, 1)].p_value, reports[(v, 2)].p_value, level).outcome
        for d in directions:
            results.append(_report_entry(reports[(v, d)], decision))
    doc = {"schema": SCHEMA_VERSION, "n": fs.n, "alpha": alpha, "level": level, "results": results}
    _emit(to_json(doc) + "\n", args.output)
    return 0


def cmd_simulate(args) -> int:
    cp = _load_config(args.config)
    spec = _dgp_spec(args, cp)
    write_forecast_csv(simulate(spec), args.output)
    return 0


def cmd_mc(args) -> int:
    cp = _load_config(args.config)
    spec = _dgp_spec(args, cp)
    n_grid = _pick(args.n_grid, cp, "mc", "n_grid", _list(int), (spec.n,))
    pi_grid = _pick(args.pi_grid, cp, "mc", "pi_grid", _list(float), (spec.pi,))
    try:
        plan = ExperimentPlan(
            dgp=spec,
            n_grid=n_grid,
            pi_grid=pi_grid,
            n_reps=_pick(args.reps, cp, "mc", "n_reps", int, 500),
            level_grid=_get(cp, "mc", "levels", _list(float), (0.01, 0.05, 0.10)),
            variants=tuple(_variants(_pick(args.variant, cp, "mc", "variants", str, "all"))),
            directions=tuple(_directions(_get(cp, "mc", "directions", str, "both"))),
            base_seed=_pick(args.seed, cp, "mc", "base_seed", int, 0),
            options=_test_options(cp),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    workers = args.workers or _get(cp, "mc", "workers", int, os.cpu_count() or 1)
    result = run_plan(plan, workers=workers, store=args.store, progress=stderr_progress)
    _emit(result.to_csv(), args.output)
    return 0


def cmd_matrix(args) -> int:
    cp = _load_config(args.config)
    alpha = _unit("alpha", _pick(args.alpha, cp, "matrix", "alpha", float, 0.025))
    level = _unit("level", _pick(args.level, cp, "matrix", "level", float, 0.10))
    kinds = _pick(args.models, cp, "matrix", "models", _list(str), MODEL_KINDS)
    for k in kinds:
        if k not in MODEL_KINDS:
            raise ConfigError(f"unknown model {k!r}; choose from {', '.join(MODEL_KINDS)}")
    window = _get(cp, "matrix", "window", int, 250)
    models = [ModelSpec(k, window=window, alpha=alpha) for k in kinds]
    variants = _variants(_pick(args.variant, cp, "matrix", "variants", str, "all"))
    y = _read_returns(args.input)
    m = _pick(args.m, cp, "matrix", "m", int, 1000)
    if not 0 < m < y.shape[0]:
        raise DataError(f"in-sample size m={m} must be below the series length {y.shape[0]}")
    workers = args.workers or _get(cp, "matrix", "workers", int, os.cpu_count() or 1)
    res = pairwise_matrix(y, m, models, variants, level, _test_options(cp), workers=workers)
    os.makedirs(args.output_dir, exist_ok=True)
    names = res.models
    for v in variants:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model"] + names)
        for i, name in enumerate(names):
            row = [name]
            for j in range(len(names)):
                p = res.pvalues[v][i, j]
                row.append("" if i == j else ("NA" if not np.isfinite(p) else _num(p)))
            w.writerow(row)
        _emit(buf.getvalue(), os.path.join(args.output_dir, f"pvalues_{v}.csv"))
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "model", "NR", "E1", "E2", "C"])
    for v in variants:
        for name, fr in res.frequencies(v).items():
            w.writerow([v, name] + [_num(fr[k]) for k in ("NR", "E1", "E2", "C")])
    _emit(buf.getvalue(), os.path.join(args.output_dir, "outcomes.csv"))
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "row", "col", "reason"])
    for v in variants:
        for (i, j), reason in sorted(res.reasons[v].items()):
            w.writerow([v, names[i], names[j], reason])
    _emit(buf.getvalue(), os.path.join(args.output_dir, "na_reasons.csv"))
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="esencompass", description="Forecast encompassing tests for ES and VaR.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test one pair of forecasters from a CSV file")
    t.add_argument("input", help="CSV with header t,y,q1,e1,q2,e2 (q columns optional)")
    t.add_argument("--variant", help="strict, aux, joint, var, a comma list or 'all' (default strict)")
    t.add_argument("--direction", help="1, 2 or both (default both)")
    t.add_argument("--alpha", type=float)
    t.add_argument("--level", type=float)
    t.add_argument("--config")
    t.add_argument("-o", "--output", help="report path (default stdout)")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="write a simulated path as CSV")
    s.add_argument("--family", help=", ".join(FAMILIES))
    s.add_argument("--pi", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--config")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("mc", help="run a Monte Carlo experiment plan")
    m.add_argument("--family")
    m.add_argument("--n-grid", dest="n_grid", type=_list(int))
    m.add_argument("--pi-grid", dest="pi_grid", type=_list(float))
    m.add_argument("--reps", type=int)
    m.add_argument("--variant")
    m.add_argument("--seed", type=int)
    m.add_argument("--alpha", type=float)
    m.add_argument("--workers", type=int)
    m.add_argument("--store", help="JSON-lines file of finished replications (resumable)")
    m.add_argument("--config")
    m.add_argument("-o", "--output")
    m.set_defaults(func=cmd_mc)

    x = sub.add_parser("matrix", help="pairwise tests between the forecasting models")
    x.add_argument("input", help="CSV with a 'y' column of returns")
    x.add_argument("--m", type=int, help="in-sample size (default 1000)")
    x.add_argument("--models", type=_list(str))
    x.add_argument("--variant")
    x.add_argument("--alpha", type=float)
    x.add_argument("--level", type=float)
    x.add_argument("--workers", type=int)
    x.add_argument("--config")
    x.add_argument("-d", "--output-dir", dest="output_dir", default=".")
    x.set_defaults(func=cmd_matrix)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
