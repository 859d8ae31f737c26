from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from esencompass.core import DataError, make_forecast_set
from esencompass.dgps import DgpSpec, simulate
from esencompass.encompassing import (
    AUX,
    C,
    E1,
    E2,
    JOINT,
    NR,
    STRICT_ES,
    VAR,
    Restriction,
    SingularOmega,
    TestOptions,
    chi2_sf,
    decide,
    parse_variant,
    restriction_for,
    run_test,
    run_tests,
    var_test,
    wald,
)
from esencompass.links import ANCHORED_OFFSET, LinkSpec
from esencompass.mestim import Theta

L = LinkSpec()


def test_wald_examples():
    r = Restriction((0, 1), (1.0, 0.0))
    assert wald(np.array([1.0, 0.0, 7.0]), np.full((3, 3), np.nan), r, 50) == (0.0, 2)
    stat, df = wald(np.array([1.1, -0.1]), np.eye(2), r, 100)
    assert stat == pytest.approx(2.0, abs=1e-12) and df == 2
    with pytest.raises(SingularOmega):
        wald(np.array([1.1, -0.1]), np.zeros((2, 2)), r, 100)


def test_restriction_validation():
    with pytest.raises(ValueError):
        Restriction((1, 1), (0.0, 0.0))
    with pytest.raises(ValueError):
        Restriction((1,), (0.0, 1.0))


@given(st.floats(0, 200), st.integers(1, 8))
def test_chi2_sf_matches_scipy(stat, df):
    assert chi2_sf(stat, df) == pytest.approx(stats.chi2.sf(stat, df), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("variant,direction,idx,vals", [
    (JOINT, 1, (1, 2, 4, 5), (1, 0, 1, 0)),
    (JOINT, 2, (1, 2, 4, 5), (0, 1, 0, 1)),
    (AUX, 1, (4, 5), (1, 0)),
    (STRICT_ES, 2, (4, 5), (0, 1)),
    (VAR, 1, (1, 2), (1, 0)),
])
def test_restrictions(variant, direction, idx, vals):
    r = restriction_for(variant, direction, L, L)
    assert r.indices == idx and r.values == vals and r.df == len(idx)


def test_restriction_with_intercepts():
    r = restriction_for(JOINT, 1, L, L, restrict_intercepts=True)
    assert r.indices == (0, 1, 2, 3, 4, 5) and r.df == 6


def test_anchored_link_second_direction_needs_swap():
    a = LinkSpec(ANCHORED_OFFSET)
    assert restriction_for(STRICT_ES, 2, a, a) is None


@pytest.mark.parametrize("text,variant", [("strict", STRICT_ES), ("AuxES", AUX), ("joint", JOINT), ("var", VAR)])
def test_parse_variant(text, variant):
    assert parse_variant(text) == variant


def test_decide_examples():
    assert decide(0.5, 0.5, 0.10).outcome == NR
    assert decide(0.01, 0.5, 0.10).outcome == E1
    assert decide(0.5, 0.01, 0.10).outcome == E2
    th = Theta(np.array([0, 0.4, 0.6]), np.array([0, 0.5, 0.5]))
    d = decide(0.01, 0.02, 0.10, th)
    assert d.outcome == C and d.combined_weights is th
    assert decide(0.01, 0.5, 0.10, th).combined_weights is None
    with pytest.raises(ValueError):
        decide(1.2, 0.5, 0.1)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.001, 0.999))
def test_decide_depends_only_on_rejections(p1, p2, level):
    out = decide(p1, p2, level).outcome
    expect = {(False, False): NR, (True, False): E1, (False, True): E2, (True, True): C}
    assert out == expect[(p1 <= level, p2 <= level)]


def test_joint_requires_var_forecasts(garch_null_1000):
    fs = garch_null_1000
    es_only = make_forecast_set(fs.y, fs.e1, fs.e2, fs.alpha)
    with pytest.raises(DataError, match="joint test requires VaR forecasts"):
        run_test(es_only, JOINT)
    rep = run_test(es_only, STRICT_ES)
    assert rep.df == 2 and 0 <= rep.p_value <= 1


def test_report_consistency(garch_null_1000):
    reps = run_tests(garch_null_1000)
    assert len(reps) == 8
    for (variant, direction), r in reps.items():
        assert r.variant == variant and r.direction == direction
        assert r.statistic >= 0
        assert r.p_value == pytest.approx(stats.chi2.sf(r.statistic, r.df), rel=1e-10)
    # joint and auxiliary tests share one estimate
    assert reps[(JOINT, 1)].theta_hat is reps[(AUX, 1)].theta_hat
    assert reps[(JOINT, 1)].df == 4


def test_direction_symmetry(garch_null_1000):
    fs = garch_null_1000
    a = run_tests(fs, [STRICT_ES, JOINT], [1, 2])
    b = run_tests(fs.swapped(), [STRICT_ES, JOINT], [1, 2])
    for v in (STRICT_ES, JOINT):
        assert abs(a[(v, 1)].statistic - b[(v, 2)].statistic) < 1e-6
        assert abs(a[(v, 2)].statistic - b[(v, 1)].statistic) < 1e-6


@pytest.mark.parametrize("c", [0.1, 10.0])
def test_scale_invariance(garch_null_1000, c):
    fs = garch_null_1000
    a = run_tests(fs)
    b = run_tests(fs.scaled(c))
    for k in a:
        assert abs(a[k].statistic - b[k].statistic) < 1e-6


def test_var_test(garch_null_1000):
    r = var_test(garch_null_1000, 2)
    assert r.variant == VAR and r.df == 2 and r.statistic >= 0


def test_strict_and_aux_close():
    fs = simulate(DgpSpec("GarchCombo", pi=0.0, n=4000, seed=9))
    r = run_tests(fs, [STRICT_ES, AUX], [1])
    assert abs(r[(STRICT_ES, 1)].p_value - r[(AUX, 1)].p_value) < 0.05


def test_options_are_used(garch_null_1000):
    opts = TestOptions(restrict_intercepts=True)
    assert run_test(garch_null_1000, STRICT_ES, 1, opts).df == 3
