"""Scikit-learn style blind equalizers.

Each estimator is fitted on a received sample sequence (no labels) and
``transform`` returns the equalizer output ``y_n = w^H x_n`` for every sample
of a sequence::

    eq = SDMMAEqualizer(n_taps=15, mu=1e-4).fit(received)
    y = eq.transform(received)
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_scalar, check_signal
from .channel import regressor_matrix
from .constellation import make_square_qam
from .equalizer import DivergenceError, center_spike, fp_solve
from .tensorops import ForgettingPolicy, MomentSet, batch_moments

__all__ = ["MMAEqualizer", "SDMMAEqualizer", "FPMMAEqualizer"]


class _BaseMMAEqualizer(TransformerMixin, BaseEstimator):
    def _validate_common(self):
        check_scalar(self.n_taps, "n_taps", low=1, integer=True)
        check_scalar(self.mu, "mu", low=0)
        check_scalar(self.record_every, "record_every", low=0, integer=True)
        if self.init_index is not None:
            check_scalar(self.init_index, "init_index", low=0, high=self.n_taps - 1, integer=True)
        if self.r_m is not None:
            check_scalar(self.r_m, "r_m", low=0, include_low=False)

    def _resolve_r_m(self) -> float:
        if self.r_m is not None:
            return float(self.r_m)
        return make_square_qam(self.constellation_order).r_m

    def _initial_taps(self) -> np.ndarray:
        if self.w0 is not None:
            w = np.array(self.w0, dtype=complex)
            if w.shape != (self.n_taps,):
                raise ValueError(f"w0 must have shape ({self.n_taps},), got {w.shape}")
            return w
        return center_spike(self.n_taps, self.init_index)

    def _start_history(self):
        self._hist_taps = []
        self._hist_index = []
        if self.record_every:
            self._hist_taps.append(self.taps_.copy())
            self._hist_index.append(0)

    def _extend_history(self, out, written, first_index):
        for k in range(written):
            self._hist_taps.append(out[k].copy())
            self._hist_index.append(first_index + k * self.record_every)

    @property
    def taps_history_(self) -> np.ndarray:
        """Recorded taps, one row per entry of ``history_index_``."""
        check_is_fitted(self, "taps_")
        if not self._hist_taps:
            return np.empty((0, self.n_taps), complex)
        return np.array(self._hist_taps)

    @property
    def history_index_(self) -> np.ndarray:
        check_is_fitted(self, "taps_")
        return np.array(self._hist_index, dtype=int)

    def transform(self, X):
        """Equalizer output for every sample of ``X`` (zero state before the start)."""
        check_is_fitted(self, "taps_")
        x = check_signal(X)
        return regressor_matrix(x, self.n_taps) @ self.taps_.conj()


class _AdaptiveMixin:
    """Shared streaming bookkeeping for the sample-by-sample equalizers."""

    def fit(self, X, y=None):
        """Adapt from the initial taps over the whole sequence ``X``.

        Raises :class:`~sdmma.equalizer.DivergenceError` if the taps blow up;
        the history recorded up to that point is kept.
        """
        for attr in ("taps_", "n_samples_seen_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        """Continue adapting from the current state over ``X``."""
        x = check_signal(X)
        if not hasattr(self, "taps_"):
            self._validate_common()
            self._setup()
            self._start_history()
        start = self.n_samples_seen_
        D = self.record_every
        n_rec = (start + x.size) // D - start // D if D else 0
        out = np.empty((max(n_rec, 1), self.n_taps), complex)
        written, bad = self._run(x, out)
        first = (start // D + 1) * D if D else 0
        self._extend_history(out, written, first)
        if bad >= 0:
            self.n_samples_seen_ = bad
            raise DivergenceError(f"equalizer taps became non-finite at sample {bad}", bad)
        self.n_samples_seen_ = start + x.size
        return self


class MMAEqualizer(_AdaptiveMixin, _BaseMMAEqualizer):
    """Stochastic (symbol-by-symbol) MMA2-2 blind equalizer.

    Parameters
    ----------
    n_taps : int
        Equalizer length N.
    mu : float
        Step size.
    constellation_order : int
        Square QAM order used to derive the dispersion constant.
    r_m : float, optional
        Dispersion constant; overrides ``constellation_order``.
    init_index : int, optional
        Position of the initial unit spike, default ``n_taps // 2``.
    w0 : array-like, optional
        Explicit initial taps; overrides ``init_index``.
    record_every : int
        Record the taps every this many samples (0 disables recording).

    Attributes
    ----------
    taps_ : ndarray of complex, shape (n_taps,)
    r_m_ : float
    n_samples_seen_ : int
    """

    def __init__(
        self,
        n_taps=15,
        mu=1e-4,
        constellation_order=16,
        r_m=None,
        init_index=None,
        w0=None,
        record_every=0,
    ):
        self.n_taps = n_taps
        self.mu = mu
        self.constellation_order = constellation_order
        self.r_m = r_m
        self.init_index = init_index
        self.w0 = w0
        self.record_every = record_every

    def _setup(self):
        self.r_m_ = self._resolve_r_m()
        self.taps_ = self._initial_taps()
        self._window = np.zeros(self.n_taps, complex)
        self.n_samples_seen_ = 0

    def _run(self, x, out):
        return _kernels.mma_run(
            x, self.taps_, self._window, float(self.mu), self.r_m_,
            int(self.record_every), int(self.n_samples_seen_), out,
        )


class SDMMAEqualizer(_AdaptiveMixin, _BaseMMAEqualizer):
    """Feedforward steepest-descent MMA2-2 blind equalizer.

    The expected MMA2-2 update direction is rebuilt at every sample from
    running estimates of one second-order and two cubic statistics of the
    received signal, so no equalizer-output feedback enters the gradient.

    Parameters
    ----------
    n_taps, mu, constellation_order, r_m, init_index, w0, record_every
        As for :class:`MMAEqualizer`.
    forgetting : "harmonic" or float
        ``"harmonic"`` weights the n-th sample by ``1/n`` (running mean of
        all data); a float in ``(0, 1]`` is a fixed exponential weight.

    Attributes
    ----------
    taps_ : ndarray of complex, shape (n_taps,)
    moments_ : MomentSet
        Current dense statistics.
    """

    def __init__(
        self,
        n_taps=15,
        mu=1e-4,
        constellation_order=16,
        r_m=None,
        init_index=None,
        w0=None,
        forgetting="harmonic",
        record_every=0,
    ):
        self.n_taps = n_taps
        self.mu = mu
        self.constellation_order = constellation_order
        self.r_m = r_m
        self.init_index = init_index
        self.w0 = w0
        self.forgetting = forgetting
        self.record_every = record_every

    def _policy(self) -> ForgettingPolicy:
        if isinstance(self.forgetting, ForgettingPolicy):
            return self.forgetting
        if self.forgetting == "harmonic":
            return ForgettingPolicy()
        return ForgettingPolicy.fixed(check_scalar(self.forgetting, "forgetting"))

    def _setup(self):
        self.policy_ = self._policy()
        self.r_m_ = self._resolve_r_m()
        self.taps_ = self._initial_taps()
        self._window = np.zeros(self.n_taps, complex)
        self._moments = _kernels.compressed_zeros(self.n_taps)
        self.n_samples_seen_ = 0

    def _run(self, x, out):
        p2, m2, p3, m3, _, _ = _kernels.symmetry_tables(self.n_taps)
        lam = -1.0 if self.policy_.mode == "harmonic" else float(self.policy_.lam)
        s1, s2, s3 = self._moments
        return _kernels.sd_run(
            x, self.taps_, self._window, s1, s2, s3, int(self.n_samples_seen_),
            float(self.mu), self.r_m_, lam, int(self.record_every), out, p2, m2, p3, m3,
        )

    @property
    def moments_(self) -> MomentSet:
        check_is_fitted(self, "taps_")
        return _kernels.expand_moments(*self._moments, self.n_samples_seen_)


class FPMMAEqualizer(_BaseMMAEqualizer):
    """Offline stabilized fixed-point MMA2-2 equalizer.

    ``fit`` estimates the statistics from the whole received sequence, then
    iterates ``w <- w + mu * g(w)`` with the frozen statistics until the
    relative gradient norm drops below ``tol``.  Here ``record_every`` counts
    iterations, not samples.

    Attributes
    ----------
    taps_ : ndarray of complex
    moments_ : MomentSet
    n_iter_ : int
    residual_ : float
    converged_ : bool
    """

    def __init__(
        self,
        n_taps=15,
        mu=0.01,
        constellation_order=16,
        r_m=None,
        init_index=None,
        w0=None,
        tol=1e-8,
        max_iter=10_000,
        record_every=0,
    ):
        self.n_taps = n_taps
        self.mu = mu
        self.constellation_order = constellation_order
        self.r_m = r_m
        self.init_index = init_index
        self.w0 = w0
        self.tol = tol
        self.max_iter = max_iter
        self.record_every = record_every

    def fit(self, X, y=None):
        x = check_signal(X)
        self._validate_common()
        check_scalar(self.tol, "tol", low=0, include_low=False)
        check_scalar(self.max_iter, "max_iter", low=1, integer=True)
        self.r_m_ = self._resolve_r_m()
        self.moments_ = batch_moments(regressor_matrix(x, self.n_taps))
        return self._solve()

    def fit_moments(self, moments: MomentSet):
        """Fit from precomputed statistics instead of a received sequence."""
        self._validate_common()
        self.r_m_ = self._resolve_r_m()
        self.moments_ = moments
        return self._solve()

    def _solve(self):
        self.taps_ = self._initial_taps()
        self._start_history()
        D = self.record_every

        def record(k, w):
            if D and k and k % D == 0:
                self._hist_taps.append(w.copy())
                self._hist_index.append(k)

        res = fp_solve(
            self.moments_, self.taps_, self.mu, self.r_m_, self.tol, self.max_iter,
            callback=record,
        )
        self.taps_ = res.taps
        self.n_iter_ = res.n_iter
        self.residual_ = res.residual
        self.converged_ = res.converged
        return self
