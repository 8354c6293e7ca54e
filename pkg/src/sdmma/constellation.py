"""Square QAM alphabets and the multimodulus dispersion constant."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Constellation", "make_square_qam", "dispersion_constant", "draw_symbols"]


@dataclass(frozen=True)
class Constellation:
    """A square QAM alphabet on the odd-integer lattice.

    Attributes
    ----------
    order : int
        Number of points (4, 16, 64, ...).
    levels : ndarray of float
        Per-dimension amplitudes, ascending.
    points : ndarray of complex
        All ``a + 1j*b`` with ``a, b`` in ``levels``.
    r_m : float
        Dispersion constant ``E[s_R^4] / E[s_R^2]``.
    """

    order: int
    levels: np.ndarray
    points: np.ndarray = field(repr=False)
    r_m: float

    @property
    def energy(self) -> float:
        """Average symbol energy ``E[|s|^2]``."""
        return 2.0 * float(np.mean(self.levels**2))


def make_square_qam(order: int) -> Constellation:
    """Build an unnormalized square ``order``-QAM alphabet.

    Levels are ``{±1, ±3, ..., ±(sqrt(order) - 1)}``.

    Raises
    ------
    ValueError
        If ``order`` is not a square of an even integer (4, 16, 64, ...).
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise TypeError(f"QAM order must be an integer, got {order!r}")
    side = int(round(np.sqrt(order))) if order > 0 else 0
    if order < 4 or side * side != order or side % 2:
        raise ValueError(
            f"{order} is not a square QAM order; expected 4, 16, 64, ... "
            "(square of an even integer)"
        )
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    c = Constellation(order=int(order), levels=levels, points=points, r_m=np.nan)
    return Constellation(
        order=int(order), levels=levels, points=points, r_m=dispersion_constant(c)
    )


def dispersion_constant(c: Constellation) -> float:
    """Return ``E[s_R^4] / E[s_R^2]`` with ``s_R`` uniform over ``c.levels``."""
    lv = np.asarray(c.levels, dtype=float)
    return float(np.mean(lv**4) / np.mean(lv**2))


def draw_symbols(c: Constellation, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` i.i.d. uniform symbols from ``c``, deterministic in ``seed``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    return c.points[rng.integers(0, c.order, size=count)]
