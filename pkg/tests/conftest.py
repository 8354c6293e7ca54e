import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    return np.linalg.norm(a - b) / scale


def noiseless_batch(channel_id, count=100_000, seed=7, n_taps=15):
    """Regressors of a noiseless 16-QAM stream, skipping the zero-filled start."""
    from sdmma.channel import NoiseSpec, builtin_channel, regressor_matrix, transmit
    from sdmma.constellation import draw_symbols, make_square_qam

    qam = make_square_qam(16)
    s = draw_symbols(qam, count + n_taps - 1, seed)
    r = transmit(s, builtin_channel(channel_id), NoiseSpec.off())
    return regressor_matrix(r, n_taps)[n_taps - 1 :]


@pytest.fixture(scope="session")
def identity_batch():
    return noiseless_batch("identity")


@pytest.fixture(scope="session")
def identity_moments(identity_batch):
    from sdmma.tensorops import batch_moments

    return batch_moments(identity_batch)


@pytest.fixture(scope="session")
def channel1_moments():
    from sdmma.tensorops import batch_moments

    return batch_moments(noiseless_batch("channel-1", seed=8))
