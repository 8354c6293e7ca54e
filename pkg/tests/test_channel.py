import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdmma.channel import (
    ChannelModel,
    NoiseSpec,
    builtin_channel,
    regressor,
    regressor_matrix,
    transmit,
)
from sdmma.constellation import draw_symbols, make_square_qam

from conftest import crandn


def test_channel_1_taps():
    h = builtin_channel("channel-1").taps
    assert h.size == 7
    assert h[0] == -0.005 - 0.004j
    assert h[3] == 0.854 + 0.52j


def test_channel_2_taps():
    h = builtin_channel("channel-2").taps
    assert h.size == 9
    assert h[3] == 0.678 + 0.1378j
    assert h[-1] == 0.0115 + 0.0118j


def test_identity_channel():
    assert np.array_equal(builtin_channel("identity").taps, [1.0 + 0j])


def test_unknown_channel():
    with pytest.raises(ValueError, match="unknown channel"):
        builtin_channel("channel-3")


def test_channel_model_rejects_all_zero():
    with pytest.raises(ValueError):
        ChannelModel(taps=[0, 0])
    with pytest.raises(ValueError):
        ChannelModel(taps=[])


def test_noise_spec_rejects_infinite_snr():
    with pytest.raises(ValueError, match="off"):
        NoiseSpec(snr_db=float("inf"))


def test_identity_noiseless_is_exact(rng):
    s = crandn(rng, 500)
    out = transmit(s, builtin_channel("identity"), NoiseSpec.off())
    assert np.array_equal(out, s)


def test_impulse_response():
    ch = builtin_channel("channel-1")
    s = np.zeros(7, complex)
    s[0] = 1
    assert np.array_equal(transmit(s, ch, NoiseSpec.off()), ch.taps)


def test_output_length_matches_input(rng):
    s = crandn(rng, 3)
    assert transmit(s, builtin_channel("channel-2"), NoiseSpec.off()).size == 3


def test_noise_power_at_30_db():
    c = make_square_qam(16)
    ch = builtin_channel("channel-1")
    s = draw_symbols(c, 100_000, seed=11)
    clean = transmit(s, ch, NoiseSpec.off())
    noisy = transmit(s, ch, NoiseSpec(30.0, seed=12), symbol_power=c.energy)
    noise = noisy - clean
    ratio = np.mean(np.abs(noise) ** 2) / np.mean(np.abs(clean) ** 2)
    assert ratio == pytest.approx(1e-3, rel=0.05)
    sigma2 = c.energy * ch.energy * 1e-3
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(sigma2, rel=0.05)
    # equal split between quadratures
    assert np.var(noise.real) == pytest.approx(np.var(noise.imag), rel=0.05)


def test_transmit_deterministic():
    c = make_square_qam(16)
    s = draw_symbols(c, 2000, seed=1)
    ch = builtin_channel("channel-2")
    a = transmit(s, ch, NoiseSpec(20.0, seed=3), symbol_power=c.energy)
    b = transmit(s, ch, NoiseSpec(20.0, seed=3), symbol_power=c.energy)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, transmit(s, ch, NoiseSpec(20.0, seed=4), symbol_power=c.energy))


@settings(max_examples=50, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.complex_numbers(max_magnitude=10, allow_nan=False),
    st.complex_numbers(max_magnitude=10, allow_nan=False),
)
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    s1, s2 = crandn(rng, 64), crandn(rng, 64)
    ch = builtin_channel("channel-1")
    off = NoiseSpec.off()
    lhs = transmit(alpha * s1 + beta * s2, ch, off)
    rhs = alpha * transmit(s1, ch, off) + beta * transmit(s2, ch, off)
    scale = 1 + abs(alpha) + abs(beta)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * scale * np.abs(s1).max() * 10)


def test_regressor_examples():
    a, b, c = 1 + 1j, 2 - 1j, 3j
    assert np.array_equal(regressor([a, b, c], 2, 2), [c, b])
    assert np.array_equal(regressor([a], 0, 3), [a, 0, 0])
    assert np.array_equal(regressor([a, b], 1, 1), [b])


@pytest.mark.parametrize("n", [-1, 3])
def test_regressor_out_of_range(n):
    with pytest.raises(IndexError):
        regressor([1, 2, 3], n, 2)


def test_regressor_matrix_matches_single_windows(rng):
    r = crandn(rng, 20)
    R = regressor_matrix(r, 6)
    assert R.shape == (20, 6)
    for n in range(20):
        assert np.array_equal(R[n], regressor(r, n, 6))
