import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sdmma import _kernels
from sdmma.channel import NoiseSpec, builtin_channel, regressor_matrix, transmit
from sdmma.constellation import draw_symbols, make_square_qam
from sdmma.equalizer import (
    DivergenceError,
    SdState,
    center_spike,
    fp_solve,
    mma_stochastic_step,
    sd_step,
)
from sdmma.estimators import FPMMAEqualizer, MMAEqualizer, SDMMAEqualizer
from sdmma.tensorops import ForgettingPolicy, batch_moments

from conftest import crandn, rel_err


@pytest.fixture(scope="module")
def received():
    qam = make_square_qam(16)
    s = draw_symbols(qam, 600, 9)
    return transmit(s, builtin_channel("channel-1"), NoiseSpec(30, 10), symbol_power=qam.energy)


ESTIMATORS = [MMAEqualizer, SDMMAEqualizer, FPMMAEqualizer]


@pytest.mark.parametrize("cls", ESTIMATORS)
def test_get_params_and_clone(cls):
    est = cls(n_taps=5, mu=2e-4)
    params = est.get_params()
    assert params["n_taps"] == 5 and params["mu"] == 2e-4
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(n_taps=7)
    assert est.n_taps == 7


@pytest.mark.parametrize("cls", ESTIMATORS)
def test_transform_requires_fit(cls):
    with pytest.raises(NotFittedError):
        cls().transform(np.ones(10))


@pytest.mark.parametrize("cls", ESTIMATORS)
def test_fit_transform(cls, received):
    y = cls(n_taps=7).fit_transform(received)
    assert y.shape == received.shape and np.iscomplexobj(y)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_taps=0), dict(mu=-1.0), dict(init_index=9, n_taps=5), dict(r_m=0.0), dict(record_every=-1)],
)
def test_parameter_validation(kwargs, received):
    with pytest.raises(ValueError):
        MMAEqualizer(**kwargs).fit(received)


@pytest.mark.parametrize("bad", [np.array([]), np.ones((3, 2)), np.array([1.0, np.nan]), np.array(["a"])])
def test_input_validation(bad):
    with pytest.raises((ValueError, TypeError)):
        SDMMAEqualizer(n_taps=3).fit(bad)


def test_column_vector_accepted(received):
    a = MMAEqualizer(n_taps=5).fit(received).taps_
    b = MMAEqualizer(n_taps=5).fit(received[:, None]).taps_
    assert np.array_equal(a, b)


def test_transform_is_w_hermitian_x(received):
    eq = MMAEqualizer(n_taps=6).fit(received)
    X = regressor_matrix(received, 6)
    assert rel_err(eq.transform(received), np.array([np.vdot(eq.taps_, x) for x in X])) <= 1e-14


def test_mma_kernel_matches_reference(received):
    N = 7
    eq = MMAEqualizer(n_taps=N, mu=1e-4).fit(received)
    w = center_spike(N)
    for x in regressor_matrix(received, N):
        w = mma_stochastic_step(w, x, 1e-4, 8.2)
    assert rel_err(eq.taps_, w) <= 1e-12


@pytest.mark.parametrize("forgetting", ["harmonic", 0.05])
def test_sd_kernel_matches_reference(received, forgetting):
    N = 5
    eq = SDMMAEqualizer(n_taps=N, mu=1e-4, forgetting=forgetting).fit(received)
    policy = ForgettingPolicy() if forgetting == "harmonic" else ForgettingPolicy.fixed(forgetting)
    state = SdState.initial(center_spike(N), 1e-4, 8.2, policy)
    for x in regressor_matrix(received, N):
        state = sd_step(state, x)
    assert rel_err(eq.taps_, state.taps) <= 1e-10
    m = eq.moments_
    for got, want in [(m.s1, state.moments.s1), (m.s2, state.moments.s2), (m.s3, state.moments.s3)]:
        assert rel_err(got, want) <= 1e-10
    assert m.count == state.moments.count == received.size


def test_sd_moments_equal_batch_moments(received):
    eq = SDMMAEqualizer(n_taps=4, mu=0.0).fit(received)
    ref = batch_moments(regressor_matrix(received, 4))
    assert rel_err(eq.moments_.s2, ref.s2) <= 1e-10
    assert rel_err(eq.moments_.s3, ref.s3) <= 1e-10


def test_symmetry_tables_round_trip(rng):
    N = 4
    m = batch_moments(crandn(rng, 30, N))
    back = _kernels.expand_moments(*_kernels.compress_moments(m), m.count)
    # symmetric columns agree up to the rounding of reordered products
    assert rel_err(back.s2, m.s2) <= 1e-14 and rel_err(back.s3, m.s3) <= 1e-14
    p2, m2, p3, m3, _, _ = _kernels.symmetry_tables(N)
    assert m2.sum() == N**3 and m3.sum() == N**3


@pytest.mark.parametrize("cls", [MMAEqualizer, SDMMAEqualizer])
def test_partial_fit_equals_fit(cls, received):
    whole = cls(n_taps=5, record_every=50).fit(received)
    parts = cls(n_taps=5, record_every=50)
    for chunk in np.array_split(received, [17, 260, 333]):
        parts.partial_fit(chunk)
    assert rel_err(parts.taps_, whole.taps_) <= 1e-12
    assert np.array_equal(parts.history_index_, whole.history_index_)
    assert rel_err(parts.taps_history_, whole.taps_history_) <= 1e-12


@pytest.mark.parametrize("cls", [MMAEqualizer, SDMMAEqualizer])
def test_refit_resets_state(cls, received):
    eq = cls(n_taps=5)
    a = eq.fit(received).taps_.copy()
    b = eq.fit(received).taps_
    assert np.array_equal(a, b)


def test_history_indices(received):
    eq = SDMMAEqualizer(n_taps=5, record_every=100).fit(received)
    assert list(eq.history_index_) == [0, 100, 200, 300, 400, 500, 600]
    assert eq.taps_history_.shape == (7, 5)
    assert np.array_equal(eq.taps_history_[0], center_spike(5))
    assert np.array_equal(eq.taps_history_[-1], eq.taps_)


@pytest.mark.parametrize("cls", [MMAEqualizer, SDMMAEqualizer])
def test_divergence_keeps_history(cls, received):
    eq = cls(n_taps=5, mu=5.0, record_every=1)
    with pytest.raises(DivergenceError) as info:
        eq.fit(received * 100)
    assert info.value.index >= 1
    hist = eq.taps_history_
    assert np.all(np.isfinite(hist))
    assert eq.history_index_[-1] < info.value.index


def test_r_m_override(received):
    a = MMAEqualizer(n_taps=5, r_m=8.2).fit(received).taps_
    b = MMAEqualizer(n_taps=5, constellation_order=16).fit(received).taps_
    assert np.array_equal(a, b)
    assert MMAEqualizer(n_taps=5, constellation_order=64).fit(received).r_m_ == 37.0


def test_init_index_and_w0(received):
    eq = MMAEqualizer(n_taps=5, init_index=1, mu=0.0).fit(received)
    assert np.array_equal(eq.taps_, center_spike(5, 1))
    w0 = np.arange(5) + 1j
    assert np.array_equal(MMAEqualizer(n_taps=5, w0=w0, mu=0.0).fit(received).taps_, w0)
    with pytest.raises(ValueError):
        MMAEqualizer(n_taps=5, w0=np.ones(4)).fit(received)


def test_fp_matches_fp_solve(received):
    eq = FPMMAEqualizer(n_taps=5, mu=5e-3, record_every=10).fit(received)
    m = batch_moments(regressor_matrix(received, 5))
    res = fp_solve(m, center_spike(5), 5e-3, 8.2, 1e-8, 10_000)
    assert np.array_equal(eq.taps_, res.taps)
    assert eq.n_iter_ == res.n_iter and eq.converged_ == res.converged
    assert eq.history_index_[0] == 0 and np.all(np.diff(eq.history_index_) == 10)


def test_fp_fit_moments(received):
    m = batch_moments(regressor_matrix(received, 5))
    a = FPMMAEqualizer(n_taps=5).fit_moments(m).taps_
    b = FPMMAEqualizer(n_taps=5).fit(received).taps_
    assert np.array_equal(a, b)
