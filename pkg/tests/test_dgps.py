from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate, stats

from esencompass.dgps import (
    FAMILIES,
    CAVIAR_NOISE_SD,
    DgpSpec,
    UnstableRecursion,
    normal_tail,
    simulate,
    t_tail,
)

ALPHA = 0.025


def test_normal_tail():
    z, xi = normal_tail(ALPHA)
    assert z == pytest.approx(-1.959964, abs=1e-6)
    assert xi == pytest.approx(-2.3378, abs=1e-4)
    assert xi / z == pytest.approx(1.1928, abs=1e-4)


@pytest.mark.parametrize("nu", [5.0, 10.0])
def test_t_tail_matches_integration(nu):
    z, es = t_tail(ALPHA, nu)
    assert stats.t.cdf(z, nu) == pytest.approx(ALPHA, abs=1e-12)
    num, _ = integrate.quad(lambda x: x * stats.t.pdf(x, nu), -np.inf, float(z), epsabs=1e-12, epsrel=1e-12)
    assert float(es) == pytest.approx(num / ALPHA, abs=1e-6)


def test_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec("Nope")
    with pytest.raises(ValueError):
        DgpSpec(pi=1.5)
    with pytest.raises(ValueError):
        DgpSpec(n=0)
    assert DgpSpec(seed=[1, 2]).seed == (1, 2)


@pytest.mark.parametrize("family", FAMILIES)
def test_determinism(family):
    spec = DgpSpec(family, pi=0.5, n=300, seed=(4, 2))
    a, b = simulate(spec), simulate(spec)
    for f in ("y", "q1", "e1", "q2", "e2"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
    c = simulate(DgpSpec(family, pi=0.5, n=300, seed=(4, 3)))
    assert not np.array_equal(a.y, c.y)


@pytest.mark.parametrize("family", FAMILIES)
def test_forecast_ordering(family):
    fs = simulate(DgpSpec(family, pi=0.3, n=2000, seed=8))
    assert np.all(fs.e1 <= fs.q1) and np.all(fs.e2 <= fs.q2)
    assert np.all(fs.e1 < 0) and np.all(fs.e2 < 0)


@pytest.mark.parametrize("pi,col", [(0.0, "q1"), (1.0, "q2")])
def test_garch_endpoints(pi, col):
    fs = simulate(DgpSpec("GarchCombo", pi=pi, n=20_000, seed=3))
    z, _ = normal_tail(ALPHA)
    u = fs.y / (getattr(fs, col) / z)
    assert abs(u.mean()) < 0.03 and abs(u.var() - 1.0) < 0.04
    assert abs(np.mean(fs.y <= getattr(fs, col)) - ALPHA) < 0.005


def test_garch_unconditional_variance():
    fs = simulate(DgpSpec("GarchCombo", pi=0.0, n=100_000, seed=1))
    target = 0.042 / (1 - 0.053 - 0.925)
    assert fs.y.var() == pytest.approx(target, rel=0.05)


def test_gas_t_mixture_and_diagnostics():
    n = 100_000
    fs, diag = simulate(DgpSpec("GasTCombo", pi=0.3, n=n, seed=2), full=True)
    freq = diag["component"].mean()
    assert abs(freq - 0.3) < 3 * np.sqrt(0.3 * 0.7 / n)
    assert 0.0 <= diag["nu_clamp_fraction"] <= 1.0
    assert np.all((diag["nu"] >= 2.1) & (diag["nu"] <= 200))


def test_gas_t_pi_zero_is_gaussian_component():
    fs, diag = simulate(DgpSpec("GasTCombo", pi=0.0, n=20_000, seed=5), full=True)
    assert not diag["component"].any()
    u = fs.y / diag["sigma1"]
    assert stats.kstest(u, "norm").pvalue > 0.001


def test_gas_t_strict_nu():
    spec = DgpSpec("GasTCombo", pi=0.5, n=2000, seed=1, strict_nu=True)
    _, diag = simulate(DgpSpec("GasTCombo", pi=0.5, n=2000, seed=1), full=True)
    if diag["nu_clamp_fraction"] > 0.10:
        with pytest.raises(UnstableRecursion):
            simulate(spec)
    else:
        simulate(spec)


@pytest.mark.parametrize("pi,i", [(0.0, 1), (1.0, 2)])
def test_vares_gas_tail_average(pi, i):
    # pooled check that each component's quantile and ES are what it forecasts
    fs = simulate(DgpSpec("VarEsGasCombo", pi=pi, n=1_000_000, seed=7))
    q, e = getattr(fs, f"q{i}"), getattr(fs, f"e{i}")
    hit = fs.y <= q
    assert abs(hit.mean() - ALPHA) < 0.001
    assert np.mean(fs.y * hit) / ALPHA == pytest.approx(e.mean(), rel=0.02)


def test_vares_gas_valid_on_many_paths():
    for seed in range(100):
        fs = simulate(DgpSpec("VarEsGasCombo", pi=0.5, n=500, seed=seed))
        assert np.all(fs.e1 < fs.q1) and np.all(fs.e2 < fs.q2)


def test_vares_gas_component_frequency():
    _, diag = simulate(DgpSpec("VarEsGasCombo", pi=0.5, n=10_000, seed=9), full=True)
    assert 0.47 <= diag["component"].mean() <= 0.53


def test_caviar_noise_has_zero_es():
    fs, diag = simulate(DgpSpec("EsCaviarCombo", pi=0.0, n=1_000_000, seed=4), full=True)
    eps = diag["eps"]
    q = np.quantile(eps, ALPHA)
    assert abs(eps[eps <= q].mean()) < 5e-3 * CAVIAR_NOISE_SD
    # at pi = 0 the realization is the first ES forecast plus noise
    np.testing.assert_allclose(fs.y - fs.e1, eps, atol=1e-12)


@pytest.mark.parametrize("flip", [False, True])
def test_caviar_offset_nonnegative(flip):
    for seed in range(20):
        _, diag = simulate(DgpSpec("EsCaviarCombo", pi=0.5, n=1000, seed=seed, flip_x_inequality=flip), full=True)
        assert np.all(diag["x1"] >= 0) and np.all(diag["x2"] >= 0)
