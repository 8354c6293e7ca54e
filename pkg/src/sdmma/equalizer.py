"""Stochastic, steepest-descent and fixed-point MMA2-2 updates.

Conventions: the equalizer output is ``y = w^H x`` and every update moves
the taps along ``+mu * g`` where ``g`` is the (expected) MMA2-2 error term
times the regressor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .tensorops import (
    ForgettingPolicy,
    MomentSet,
    cubic_tap_vector_2,
    cubic_tap_vector_3,
    mat_of,
    update_moments,
    vec_of,
)

__all__ = [
    "DivergenceError",
    "center_spike",
    "equalize",
    "mma_error",
    "mma_stochastic_step",
    "per_sample_identity_rhs",
    "sd_gradient",
    "SdState",
    "sd_step",
    "kron_gradient_34",
    "fp_fixed_point_raw",
    "fp_stabilized_step",
    "FpResult",
    "fp_solve",
]

MAX_CONDITION = 1e12

# overflow is expected on divergence and reported through DivergenceError
def _quiet():
    return np.errstate(over="ignore", invalid="ignore")


class DivergenceError(ArithmeticError):
    """Taps became non-finite; ``index`` is the symbol or iteration index."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


def center_spike(N: int, index: int | None = None) -> np.ndarray:
    """Unit impulse at ``index`` (default ``N // 2``)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    index = N // 2 if index is None else index
    if not 0 <= index < N:
        raise ValueError(f"spike index {index} outside [0, {N})")
    w = np.zeros(N, dtype=complex)
    w[index] = 1.0
    return w


def _pair(w, x):
    w = np.asarray(w, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if w.shape != x.shape or w.ndim != 1:
        raise ValueError(f"tap/regressor shape mismatch: {w.shape} vs {x.shape}")
    return w, x


def _check_finite(w, index=None, what="taps"):
    if not np.all(np.isfinite(w)):
        where = "" if index is None else f" at index {index}"
        raise DivergenceError(f"{what} became non-finite{where}", index)
    return w


def equalize(w, x) -> complex:
    """Equalizer output ``w^H x``."""
    w, x = _pair(w, x)
    return complex(np.vdot(w, x))


def mma_error(y: complex, r_m: float) -> complex:
    """``(R_m - y_R^2) y_R - j (R_m - y_I^2) y_I``."""
    yr, yi = y.real, y.imag
    return complex((r_m - yr * yr) * yr, -(r_m - yi * yi) * yi)


def mma_stochastic_step(w, x, mu: float, r_m: float) -> np.ndarray:
    """One symbol-by-symbol MMA2-2 update."""
    w, x = _pair(w, x)
    if mu < 0:
        raise ValueError(f"step size must be nonnegative, got {mu}")
    with _quiet():
        e = mma_error(complex(np.vdot(w, x)), r_m)
        w = w + mu * e * x
    return _check_finite(w)


def per_sample_identity_rhs(w, x, r_m: float) -> np.ndarray:
    """``(R_m x^H w - 3/4 (x^H w)^2 (w^H x) - 1/4 (w^H x)^3) x``."""
    w, x = _pair(w, x)
    y = np.vdot(w, x)
    yc = np.conj(y)
    return (r_m * yc - 0.75 * yc * yc * y - 0.25 * y**3) * x


def sd_gradient(m: MomentSet, w, r_m: float) -> np.ndarray:
    """Expected MMA2-2 update direction evaluated from moment estimates."""
    w = np.asarray(w, dtype=complex)
    if w.ndim != 1 or w.size != m.n_taps:
        raise ValueError(f"taps of length {w.size} do not match moments of size {m.n_taps}")
    return (
        r_m * (m.s1 @ w)
        - 0.75 * (m.s2 @ cubic_tap_vector_2(w))
        - 0.25 * (m.s3 @ cubic_tap_vector_3(w).conj())
    )


@dataclass(frozen=True)
class SdState:
    taps: np.ndarray
    moments: MomentSet
    policy: ForgettingPolicy
    mu: float
    r_m: float

    def __post_init__(self):
        if self.moments.n_taps != np.shape(self.taps)[0]:
            raise ValueError("moment size does not match tap length")
        if self.mu < 0:
            raise ValueError(f"step size must be nonnegative, got {self.mu}")

    @classmethod
    def initial(cls, taps, mu, r_m, policy=None) -> "SdState":
        taps = np.asarray(taps, dtype=complex)
        return cls(
            taps, MomentSet.zeros(taps.size), policy or ForgettingPolicy(), mu, r_m
        )


def sd_step(state: SdState, x) -> SdState:
    """Absorb ``x`` into the moments, then take one steepest-descent step.

    The weight update uses the statistics that already include ``x``.
    """
    moments = update_moments(state.moments, x, state.policy)
    with _quiet():
        taps = state.taps + state.mu * sd_gradient(moments, state.taps, state.r_m)
    _check_finite(taps, moments.count)
    return SdState(taps, moments, state.policy, state.mu, state.r_m)


def kron_gradient_34(k4, w) -> np.ndarray:
    """``mat[k4 vec[w w^H]] w``: the fourth-moment term via the Kronecker statistic."""
    w = np.asarray(w, dtype=complex)
    N = w.size
    k4 = np.asarray(k4, dtype=complex)
    if k4.shape != (N * N, N * N):
        raise ValueError(f"expected a {N * N}x{N * N} statistic, got {k4.shape}")
    return mat_of(k4 @ vec_of(np.outer(w, w.conj())), N) @ w


def _check_conditioning(s1):
    cond = np.linalg.cond(s1)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise np.linalg.LinAlgError(
            f"second-order statistic is singular or ill-conditioned (cond ~ {cond:.3g})"
        )


def fp_fixed_point_raw(m: MomentSet, w, r_m: float) -> np.ndarray:
    """Unstabilized fixed-point map.

    ``w <- S1^{-1} (3 S2 v2(w) + S3 conj(v3(w))) / (4 R_m)``.  Its fixed points
    are exactly the zeros of :func:`sd_gradient`, but iterating it does not
    converge in general; use :func:`fp_solve` to find them.
    """
    w = np.asarray(w, dtype=complex)
    if w.size != m.n_taps:
        raise ValueError(f"taps of length {w.size} do not match moments of size {m.n_taps}")
    _check_conditioning(m.s1)
    rhs = 3.0 * (m.s2 @ cubic_tap_vector_2(w)) + m.s3 @ cubic_tap_vector_3(w).conj()
    return np.linalg.solve(m.s1, rhs) / (4.0 * r_m)


def fp_stabilized_step(m: MomentSet, w, mu: float, r_m: float) -> np.ndarray:
    """``w + mu * sd_gradient(m, w)`` with frozen (offline) moments."""
    if mu < 0:
        raise ValueError(f"step size must be nonnegative, got {mu}")
    w = np.asarray(w, dtype=complex)
    with _quiet():
        w = w + mu * sd_gradient(m, w, r_m)
    return _check_finite(w)


class FpResult(NamedTuple):
    taps: np.ndarray
    n_iter: int
    residual: float
    converged: bool


def _residual(g, w) -> float:
    return float(np.linalg.norm(g) / max(np.linalg.norm(w), 1.0))


def fp_solve(
    m: MomentSet,
    w0,
    mu: float,
    r_m: float,
    tol: float = 1e-8,
    max_iters: int = 10_000,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> FpResult:
    """Iterate :func:`fp_stabilized_step` until ``|g| / max(|w|, 1) < tol``.

    ``callback(k, w)`` is invoked with the taps after ``k`` steps, starting at
    ``k = 0``.  Running out of iterations is reported through
    ``converged=False``; non-finite taps raise :class:`DivergenceError`.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    w = np.array(w0, dtype=complex)
    g = sd_gradient(m, w, r_m)
    res = _residual(g, w)
    if callback is not None:
        callback(0, w)
    k = 0
    while res >= tol and k < max_iters:
        k += 1
        with _quiet():
            w = w + mu * g
            _check_finite(w, k)
            g = sd_gradient(m, w, r_m)
            res = _residual(g, w)
        if not np.isfinite(res):
            raise DivergenceError(f"gradient became non-finite at iteration {k}", k)
        if callback is not None:
            callback(k, w)
    return FpResult(w, k, res, res < tol)
