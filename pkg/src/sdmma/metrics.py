"""Combined channel-equalizer response and the ISI measure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DB_FLOOR",
    "combined_response",
    "isi_ratio",
    "isi_ensemble_db",
    "IsiTrajectory",
]

DB_FLOOR = -150.0
_FLOOR_LINEAR = 1e-15


def combined_response(h, w) -> np.ndarray:
    """Overall impulse response ``t = h * conj(w)``, length ``len(h) + N - 1``.

    ``h`` may be a :class:`~sdmma.channel.ChannelModel` or a tap array.
    """
    h = np.asarray(getattr(h, "taps", h), dtype=complex)
    w = np.asarray(w, dtype=complex)
    if h.size == 0 or w.size == 0:
        raise ValueError("channel and equalizer must be nonempty")
    return np.convolve(h, w.conj())


def isi_ratio(t) -> float:
    """Off-peak energy over peak energy of a combined response."""
    p = np.abs(np.asarray(t, dtype=complex)) ** 2
    peak = p.max(initial=0.0)
    if peak == 0.0:
        raise ValueError("ISI of an all-zero response is undefined")
    return float((p.sum() - peak) / peak)


def isi_ensemble_db(ratios) -> float:
    """``10 log10(mean(ratios))``, floored at ``DB_FLOOR``.

    Averaging happens on the linear ratios, before the logarithm.
    """
    r = np.asarray(ratios, dtype=float)
    if r.size == 0:
        raise ValueError("no ratios to average")
    mean = r.mean()
    if mean < _FLOOR_LINEAR:
        return DB_FLOOR
    return float(10.0 * np.log10(mean))


@dataclass
class IsiTrajectory:
    """Linear ISI ratios of one or more runs sampled at common indices.

    ``ratios`` has shape ``(runs, len(indices))``.
    """

    indices: np.ndarray
    ratios: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int)
        self.ratios = np.atleast_2d(np.asarray(self.ratios, dtype=float))
        if self.ratios.shape[1] != self.indices.size:
            raise ValueError("ratios do not match the recorded indices")
        if np.any(self.ratios < 0):
            raise ValueError("ISI ratios must be nonnegative")

    @property
    def db(self) -> np.ndarray:
        return np.array([isi_ensemble_db(col) for col in self.ratios.T])
