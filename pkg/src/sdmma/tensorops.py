"""vec/mat/Kronecker primitives and the higher-order moment estimators.

Index conventions are column-major throughout: entry ``(i, j)`` of a ``p x q``
matrix is element ``j*p + i`` of its ``vec`` (0-based).  Nesting the rule
fixes the ordering of the ``N**3`` columns of the cubic statistics: column
``i + N*j + N**2*k`` pairs with ``w_i w_j conj(w_k)`` (or ``w_i w_j w_k``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "vec_of",
    "mat_of",
    "kron",
    "sample_stat_1",
    "sample_stat_2",
    "sample_stat_3",
    "cubic_tap_vector_2",
    "cubic_tap_vector_3",
    "ForgettingPolicy",
    "MomentSet",
    "update_moments",
    "batch_moments",
    "fourth_moment_kron",
]

_CHUNK = 2048


def vec_of(m) -> np.ndarray:
    """Stack the columns of ``m`` into one vector."""
    m = np.asarray(m)
    if m.size == 0:
        raise ValueError("vec of an empty matrix")
    if m.ndim == 1:
        m = m[:, None]
    return m.reshape(-1, order="F")


def mat_of(v, N: int) -> np.ndarray:
    """Inverse of :func:`vec_of` for a length ``N**2`` vector."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size != N * N:
        raise ValueError(f"mat_of expects a vector of length {N * N}, got shape {v.shape}")
    return v.reshape((N, N), order="F")


def kron(a, b) -> np.ndarray:
    """Kronecker product; entry ``(p*i + r, q*j + s)`` is ``a[i, j] * b[r, s]``."""
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    if a.size == 0 or b.size == 0:
        raise ValueError("kron of an empty matrix")
    return np.kron(a, b)


def _as_regressor(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("regressor must be a nonempty 1-D vector")
    return x


def sample_stat_1(x) -> np.ndarray:
    """``x x^H``."""
    x = _as_regressor(x)
    return np.outer(x, x.conj())


def sample_stat_2(x) -> np.ndarray:
    """``x vec[x vec[x x^H]^T]^H``, an ``N x N**3`` matrix."""
    x = _as_regressor(x)
    inner = vec_of(np.outer(x, x.conj()))
    return np.outer(x, vec_of(np.outer(x, inner)).conj())


def sample_stat_3(x) -> np.ndarray:
    """``x vec[x vec[x x^T]^T]^T``, an ``N x N**3`` matrix (no conjugation)."""
    x = _as_regressor(x)
    inner = vec_of(np.outer(x, x))
    return np.outer(x, vec_of(np.outer(x, inner)))


def cubic_tap_vector_2(w) -> np.ndarray:
    """``vec[w vec[w w^H]^T]``, the tap-side partner of ``sample_stat_2``."""
    w = _as_regressor(w)
    return vec_of(np.outer(w, vec_of(np.outer(w, w.conj()))))


def cubic_tap_vector_3(w) -> np.ndarray:
    """``vec[w vec[w w^T]^T]``, the tap-side partner of ``sample_stat_3``."""
    w = _as_regressor(w)
    return vec_of(np.outer(w, vec_of(np.outer(w, w))))


@dataclass(frozen=True)
class ForgettingPolicy:
    """Weight given to the newest sample by the running estimators.

    ``harmonic`` uses ``1/n`` at the n-th sample (a running mean);
    ``fixed`` uses a constant ``lam`` in ``(0, 1]``.
    """

    mode: str = "harmonic"
    lam: float | None = None

    def __post_init__(self):
        if self.mode == "harmonic":
            if self.lam is not None:
                raise ValueError("harmonic policy takes no lambda")
        elif self.mode == "fixed":
            if self.lam is None or not 0.0 < self.lam <= 1.0:
                raise ValueError(f"fixed lambda must lie in (0, 1], got {self.lam!r}")
        else:
            raise ValueError(f"unknown forgetting mode {self.mode!r}")

    @classmethod
    def fixed(cls, lam: float) -> "ForgettingPolicy":
        return cls("fixed", float(lam))

    def weight(self, n: int) -> float:
        """Lambda applied to the ``n``-th sample (1-indexed)."""
        if self.mode == "harmonic":
            return 1.0 / n
        return self.lam

    def __str__(self):
        return "harmonic" if self.mode == "harmonic" else f"fixed:{self.lam!r}"


@dataclass(frozen=True)
class MomentSet:
    """Running estimates of ``E[x x^H]`` and the two cubic statistics."""

    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    count: int = 0

    def __post_init__(self):
        N = self.s1.shape[0]
        if (
            self.s1.shape != (N, N)
            or self.s2.shape != (N, N**3)
            or self.s3.shape != (N, N**3)
        ):
            raise ValueError(
                f"inconsistent moment shapes {self.s1.shape}, {self.s2.shape}, {self.s3.shape}"
            )

    @classmethod
    def zeros(cls, N: int) -> "MomentSet":
        return cls(
            np.zeros((N, N), complex),
            np.zeros((N, N**3), complex),
            np.zeros((N, N**3), complex),
            0,
        )

    @property
    def n_taps(self) -> int:
        return self.s1.shape[0]


def update_moments(m: MomentSet, x, policy: ForgettingPolicy) -> MomentSet:
    """Absorb one regressor: ``S <- (1 - lam) S + lam f(x)`` for each statistic."""
    x = _as_regressor(x)
    if x.size != m.n_taps:
        raise ValueError(f"regressor length {x.size} does not match moments of size {m.n_taps}")
    lam = policy.weight(m.count + 1)
    keep = 1.0 - lam
    return MomentSet(
        keep * m.s1 + lam * sample_stat_1(x),
        keep * m.s2 + lam * sample_stat_2(x),
        keep * m.s3 + lam * sample_stat_3(x),
        m.count + 1,
    )


def _cubic_rows(X: np.ndarray, conj_last: bool) -> np.ndarray:
    # row b, column i + N*j + N^2*k  ->  x_i x_j x_k  (conj on x_k if asked)
    B, N = X.shape
    last = X.conj() if conj_last else X
    return (last[:, :, None, None] * X[:, None, :, None] * X[:, None, None, :]).reshape(B, N**3)


def _stack(regressors) -> np.ndarray:
    X = np.asarray(regressors, dtype=complex)
    if X.ndim == 1 and X.size:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("expected a nonempty batch of equal-length regressors")
    return X


def batch_moments(regressors) -> MomentSet:
    """Sample means of the three statistics over a batch of regressors.

    ``regressors`` is a sequence of length-N vectors or a ``(B, N)`` array.
    """
    X = _stack(regressors)
    B, N = X.shape
    s1 = X.T @ X.conj() / B
    s2 = np.zeros((N, N**3), complex)
    s3 = np.zeros((N, N**3), complex)
    for start in range(0, B, _CHUNK):
        Xc = X[start : start + _CHUNK]
        s2 += Xc.T @ _cubic_rows(Xc, conj_last=True).conj()
        s3 += Xc.T @ _cubic_rows(Xc, conj_last=False)
    return MomentSet(s1, s2 / B, s3 / B, B)


def fourth_moment_kron(regressors) -> np.ndarray:
    """Batch mean of ``kron((x x^H)^T, x x^H)``, an ``N**2 x N**2`` matrix."""
    X = _stack(regressors)
    B, N = X.shape
    acc = np.zeros((N * N, N * N), complex)
    for start in range(0, B, _CHUNK):
        Xc = X[start : start + _CHUNK]
        Xh = Xc.conj()
        # row i*N + r, column j*N + s: conj(x_i) x_j x_r conj(x_s)
        acc += np.einsum("bi,br,bj,bs->irjs", Xh, Xc, Xc, Xh, optimize=True).reshape(
            N * N, N * N
        )
    return acc / B
