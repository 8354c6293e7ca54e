"""Baud-spaced FIR channel with AWGN, and transversal-filter regressors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelModel",
    "NoiseSpec",
    "builtin_channel",
    "transmit",
    "regressor",
    "regressor_matrix",
    "BUILTIN_CHANNELS",
]

# Voice-band telephone channel.
_CHANNEL_1 = (
    -0.005 - 0.004j,
    0.009 + 0.03j,
    -0.024 - 0.104j,
    0.854 + 0.52j,
    -0.218 + 0.273j,
    0.049 - 0.074j,
    -0.016 + 0.02j,
)
# Larger eigen-spread channel.
_CHANNEL_2 = (
    -0.023 - 0.0345j,
    0.0804 - 0.0804j,
    0.2068 - 0.1149j,
    0.678 + 0.1378j,
    0.1277 + 0.0345j,
    -0.1232 - 0.1103j,
    -0.023 - 0.021j,
    0.0176 + 0.1196j,
    0.0115 + 0.0118j,
)

BUILTIN_CHANNELS = {
    "channel-1": _CHANNEL_1,
    "channel-2": _CHANNEL_2,
    "identity": (1.0 + 0j,),
}


@dataclass(frozen=True)
class ChannelModel:
    taps: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=complex))
        if taps.ndim != 1 or taps.size == 0:
            raise ValueError("channel taps must be a nonempty 1-D sequence")
        if not np.any(taps != 0):
            raise ValueError("channel taps must contain a nonzero entry")
        object.__setattr__(self, "taps", taps)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise at ``snr_db`` (output-referred).

    Use ``NoiseSpec.off()`` for a noiseless channel; ``snr_db`` must stay finite.
    """

    snr_db: float = 30.0
    seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite; use NoiseSpec.off() for no noise")

    @classmethod
    def off(cls) -> "NoiseSpec":
        return cls(snr_db=0.0, seed=0, enabled=False)


def builtin_channel(name: str) -> ChannelModel:
    """Return one of ``channel-1``, ``channel-2`` or ``identity``."""
    try:
        taps = BUILTIN_CHANNELS[name]
    except KeyError:
        raise ValueError(
            f"unknown channel {name!r}; choose from {sorted(BUILTIN_CHANNELS)}"
        ) from None
    return ChannelModel(taps=np.array(taps, dtype=complex), name=name)


def transmit(
    symbols,
    channel: ChannelModel,
    noise: NoiseSpec,
    *,
    symbol_power: float | None = None,
) -> np.ndarray:
    """Pass ``symbols`` through ``channel`` and add noise.

    The convolution is causal with zero initial state and the output has the
    same length as the input. The noise variance is
    ``symbol_power * sum|h|^2 / 10**(snr_db/10)``, split equally between the
    real and imaginary parts. ``symbol_power`` should be the constellation's
    analytic ``E[|s|^2]``; when omitted the empirical mean of ``|symbols|^2``
    is used.
    """
    s = np.asarray(symbols, dtype=complex)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("symbols must be a nonempty 1-D sequence")
    out = np.convolve(s, channel.taps)[: s.size]
    if not noise.enabled:
        return out
    if symbol_power is None:
        symbol_power = float(np.mean(np.abs(s) ** 2))
    sigma2 = symbol_power * channel.energy / 10.0 ** (noise.snr_db / 10.0)
    rng = np.random.default_rng(noise.seed)
    v = rng.standard_normal((2, s.size))
    return out + np.sqrt(sigma2 / 2.0) * (v[0] + 1j * v[1])


def regressor(received, n: int, N: int) -> np.ndarray:
    """Window ``[r[n], r[n-1], ..., r[n-N+1]]`` with zeros before the start."""
    r = np.asarray(received, dtype=complex)
    if not 0 <= n < r.size:
        raise IndexError(f"index {n} out of range for sequence of length {r.size}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    x = np.zeros(N, dtype=complex)
    m = min(N, n + 1)
    x[:m] = r[n::-1][:m]
    return x


def regressor_matrix(received, N: int) -> np.ndarray:
    """All regressors of ``received`` stacked as rows, shape ``(len, N)``."""
    r = np.asarray(received, dtype=complex)
    padded = np.concatenate([np.zeros(N - 1, dtype=complex), r])
    # row n = padded[n + N - 1], ..., padded[n]
    return np.lib.stride_tricks.sliding_window_view(padded, N)[:, ::-1].copy()
