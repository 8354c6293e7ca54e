from fractions import Fraction

import numpy as np
import pytest

from sdmma.constellation import dispersion_constant, draw_symbols, make_square_qam


def enumerated_r_m(order):
    """E[Re(s)^4] / E[Re(s)^2] over every point, in exact arithmetic."""
    side = int(order**0.5)
    re = [Fraction(a) for a in range(-(side - 1), side, 2) for _ in range(side)]
    return sum(r**4 for r in re) / sum(r**2 for r in re)


def test_qpsk_points():
    c = make_square_qam(4)
    assert set(c.points) == {1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j}
    assert list(c.levels) == [-1, 1]


def test_sixteen_levels():
    c = make_square_qam(16)
    assert c.points.size == 16
    assert list(c.levels) == [-3, -1, 1, 3]


@pytest.mark.parametrize("order", [0, 2, 6, 8, 9, 32, -16])
def test_rejects_non_square_orders(order):
    with pytest.raises(ValueError, match="square QAM"):
        make_square_qam(order)


def test_rejects_non_integer():
    with pytest.raises(TypeError):
        make_square_qam(16.0)


@pytest.mark.parametrize("order, expected", [(4, 1.0), (16, 8.2), (64, 37.0)])
def test_dispersion_constant(order, expected):
    c = make_square_qam(order)
    oracle = enumerated_r_m(order)
    assert oracle == Fraction(expected).limit_denominator(1000)
    assert dispersion_constant(c) == pytest.approx(float(oracle), rel=1e-15)
    assert c.r_m == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("order", [4, 16, 64, 256])
def test_constellation_invariants(order):
    c = make_square_qam(order)
    pts = set(c.points.tolist())
    assert len(pts) == order
    for p in pts:
        assert -p in pts and p.conjugate() in pts and 1j * p in pts
    expected = {complex(a, b) for a in c.levels for b in c.levels}
    assert pts == expected
    lv2 = c.levels**2
    assert lv2.min() <= c.r_m <= lv2.max()
    assert c.energy == pytest.approx(np.mean(np.abs(c.points) ** 2))


def test_draw_symbols_deterministic():
    c = make_square_qam(16)
    a = draw_symbols(c, 1000, seed=5)
    b = draw_symbols(c, 1000, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, draw_symbols(c, 1000, seed=6))


def test_draw_symbols_rejects_zero_count():
    with pytest.raises(ValueError):
        draw_symbols(make_square_qam(4), 0, seed=0)


def test_qpsk_moments():
    n = 100_000
    s = draw_symbols(make_square_qam(4), n, seed=1)
    # per-sample mean of s has variance E|s|^2 / n = 2 / n
    assert abs(s.mean()) <= 3 * np.sqrt(2.0 / n)
    # Re(s)^2 == 1 exactly for QPSK
    assert np.mean(s.real**2) == pytest.approx(1.0, abs=1e-12)


def test_sixteen_qam_frequencies():
    n = 100_000
    c = make_square_qam(16)
    s = draw_symbols(c, n, seed=2)
    p = 1 / 16
    sigma = np.sqrt(p * (1 - p) / n)
    for point in c.points:
        freq = np.mean(s == point)
        assert abs(freq - p) <= 3 * sigma


def test_empirical_kurtosis_ratio_matches_r_m():
    n = 200_000
    c = make_square_qam(16)
    re = draw_symbols(c, n, seed=3).real
    ratio = np.mean(re**4) / np.mean(re**2)
    # delta-method standard error of a ratio of means
    m4, m2 = np.mean(re**4), np.mean(re**2)
    grad = np.array([1 / m2, -m4 / m2**2])
    cov = np.cov(np.vstack([re**4, re**2])) / n
    se = np.sqrt(grad @ cov @ grad)
    assert abs(ratio - c.r_m) <= 3 * se
