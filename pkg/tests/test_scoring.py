from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from esencompass.core import DomainError
from esencompass.scoring import fz0_loss, psi, tick_loss

ALPHA = 0.025


def test_fz0_reference_values():
    assert fz0_loss(1.0, -2.0, -3.0, ALPHA) == pytest.approx(-(1 / -3.0) * (-1.0) + math.log(3.0), abs=1e-14)
    assert fz0_loss(1.0, -2.0, -3.0, ALPHA) == pytest.approx(0.765279, abs=1e-6)
    assert fz0_loss(-1.0, -1.0, -1.0, 0.3) == 0.0
    assert fz0_loss(-3.0, -2.0, -2.5, ALPHA) == pytest.approx(16.716291, abs=1e-6)


def test_fz0_domain():
    with pytest.raises(DomainError):
        fz0_loss(0.0, -1.0, 0.0, ALPHA)
    with pytest.raises(DomainError):
        fz0_loss(np.zeros(3), -np.ones(3), np.array([-1.0, -1.0, 0.5]), ALPHA)


def test_fz0_broadcasts():
    out = fz0_loss(np.array([1.0, -3.0]), -2.0, np.array([-3.0, -2.5]), ALPHA)
    assert out.shape == (2,)
    np.testing.assert_allclose(out, [0.7652789, 16.716291], atol=1e-6)


def test_tick_reference_values():
    assert tick_loss(-2.0, -2.0, 0.3) == 0.0
    assert tick_loss(-3.0, -2.0, ALPHA) == pytest.approx(0.975, abs=1e-15)
    assert tick_loss(1.0, -2.0, ALPHA) == pytest.approx(0.075, abs=1e-15)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.001, 0.999))
def test_tick_nonnegative(y, q, a):
    assert tick_loss(y, q, a) >= 0.0


@given(st.floats(-20, 20), st.floats(0.01, 10), st.floats(0.0, 5), st.floats(0.01, 100))
def test_fz0_homogeneity(y, neg_q, gap, c):
    q = -neg_q
    e = q - gap - 1e-3
    diff = fz0_loss(c * y, c * q, c * e, ALPHA) - fz0_loss(y, q, e, ALPHA)
    assert diff == pytest.approx(math.log(c), abs=1e-9 * max(1.0, abs(fz0_loss(y, q, e, ALPHA))))


def test_psi_reference_values():
    p = psi(1.0, -2.0, -3.0, np.array([1.0, -2.0, -1.0]), np.array([1.0, -3.0, -4.0]), ALPHA)
    np.testing.assert_allclose(p.psi_q, [-1 / 3, 2 / 3, 1 / 3], atol=1e-14)
    np.testing.assert_allclose(p.psi_e, [-1 / 9, 1 / 3, 4 / 9], atol=1e-14)
    assert p.stacked().shape == (6,)


def test_psi_exact_hit():
    g = np.array([1.0, 0.5, -2.0])
    p = psi(-1.5, -1.5, -1.5, g, g, ALPHA)
    np.testing.assert_array_equal(p.psi_e, 0.0)
    np.testing.assert_allclose(p.psi_q, -g * (1 - ALPHA) / (ALPHA * -1.5))


def test_psi_domain():
    with pytest.raises(DomainError):
        psi(0.0, -1.0, 0.0, [1.0], [1.0], ALPHA)


@given(st.integers(0, 10_000))
def test_psi_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    f = -np.sort(rng.uniform(0.5, 4.0, 4))[::-1]  # f[0] > f[1] > ... all negative
    xq = np.array([1.0, f[0], f[1]])
    xe = np.array([1.0, f[2], f[3]])
    beta = np.array([0.0, 1.0, 0.0]) + rng.uniform(-0.2, 0.2, 3)
    eta = np.array([0.0, 1.0, 0.0]) + rng.uniform(-0.2, 0.2, 3)
    q, e = xq @ beta, xe @ eta
    assume(e < -0.1)
    y = q + rng.choice([-1.0, 1.0]) * rng.uniform(0.01, 2.0)
    p = psi(y, q, e, xq, xe, ALPHA).stacked()

    def loss(th):
        return fz0_loss(y, xq @ th[:3], xe @ th[3:], ALPHA)

    th = np.concatenate([beta, eta])
    fd = np.empty(6)
    for i in range(6):
        h = 1e-6 * max(1.0, abs(th[i]))
        d = np.zeros(6)
        d[i] = h
        fd[i] = (loss(th + d) - loss(th - d)) / (2 * h)
    np.testing.assert_allclose(p, fd, rtol=1e-5, atol=1e-7)


def test_strict_consistency_small_grid():
    # coarse version of the acceptance check: the truth beats its neighbours
    rng = np.random.default_rng(5)
    y = rng.standard_normal(200_000)
    z, xi = -1.959964, -2.337802
    base = fz0_loss(y, z, xi, ALPHA).mean()
    for dq, de in [(0.1, 0), (-0.1, 0), (0, 0.1), (0, -0.1), (0.1, 0.1), (-0.1, -0.1)]:
        assert fz0_loss(y, z + dq, xi + de, ALPHA).mean() > base
