"""Dyadic quantile coupling of unit-rate Poisson paths with Brownian motions.

For each channel a Poisson path ``J`` and a Brownian motion ``W`` are built on
``[0, U]`` (``U`` a power of two) so that ``J(s) - s`` stays within
``O(log U)`` of ``W(s)``:

* the totals are coupled through a common normal draw ``xi``:
  ``W(U) = sqrt(U) xi`` and ``J(U)`` is the Poisson(U) quantile of ``Phi(xi)``;
* every dyadic interval is split in two.  The Brownian midpoint, given the
  endpoints, is ``mean + sqrt(L) / 2 * xi``.  The Poisson count of the left
  half, given the total ``N``, is the Binomial(N, 1/2) quantile of the same
  ``Phi(xi)``;
* below unit length the Poisson arrivals are uniform within their interval
  and ``W`` is refined by independent bridge draws down to ``1 / 8``, then
  interpolated linearly.

Each marginal is exact (a Poisson process, a Brownian motion on the grid), so
jump chains driven by ``arrival`` have the law of the direct simulator.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special, stats

from .errors import ValidationError
from .rng import COUPLING, stream

SUB_LEVELS = 3          # Brownian refinement below unit length: 2**-3
_U_EPS = 1e-300


def _quantile_u(xi: np.ndarray) -> np.ndarray:
    u = special.ndtr(xi)
    return np.clip(u, _U_EPS, 1.0 - 2.0**-53)


class DyadicCoupling:
    """Coupled ``(J_c, W_c)`` for channels ``c = 0 .. channels - 1``."""

    def __init__(self, seed: int, channels: int, horizon: float):
        if not horizon > 0:
            raise ValidationError("horizon must be positive")
        self.levels = max(0, math.ceil(math.log2(horizon)))
        self.U = float(2**self.levels)
        self._arr = []
        self._w = []
        for c in range(channels):
            arr, w = self._build(stream(seed, COUPLING, c))
            self._arr.append(arr)
            self._w.append(w)
        self.h = 2.0**-SUB_LEVELS

    def _build(self, rng: np.random.Generator):
        U = self.U
        xi = rng.standard_normal()
        counts = np.array([int(stats.poisson.ppf(_quantile_u(np.array([xi]))[0], U))])
        incs = np.array([math.sqrt(U) * xi])
        length = U
        for _ in range(self.levels):
            xi = rng.standard_normal(len(counts))
            half = math.sqrt(length) / 2 * xi
            left_w = incs / 2 + half
            left_n = stats.binom.ppf(_quantile_u(xi), counts, 0.5).astype(np.int64)
            counts = np.stack([left_n, counts - left_n], axis=1).ravel()
            incs = np.stack([left_w, incs - left_w], axis=1).ravel()
            length /= 2
        # unit intervals: uniform arrivals, then Brownian refinement
        starts = np.repeat(np.arange(len(counts), dtype=float), counts)
        arr = np.sort(starts + rng.random(counts.sum()))
        for _ in range(SUB_LEVELS):
            xi = rng.standard_normal(len(incs))
            left = incs / 2 + math.sqrt(length) / 2 * xi
            incs = np.stack([left, incs - left], axis=1).ravel()
            length /= 2
        w = np.concatenate([[0.0], np.cumsum(incs)])
        return arr, w

    def arrival(self, channel: int, m: int) -> float:
        arr = self._arr[channel]
        if m >= len(arr):
            raise ValidationError(f"channel {channel} has no arrival {m} before horizon {self.U}")
        return float(arr[m])

    def poisson(self, channel: int, s) -> np.ndarray:
        """``J_c(s)``: number of arrivals in ``[0, s]``."""
        return np.searchsorted(self._arr[channel], s, side="right")

    def brownian(self, channel: int, s) -> np.ndarray:
        """``W_c(s)`` by linear interpolation on the ``1/8`` grid."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.U):
            raise ValidationError(f"internal time outside [0, {self.U}]")
        w = self._w[channel]
        pos = s / self.h
        i = np.minimum(np.floor(pos).astype(np.int64), len(w) - 2)
        frac = pos - i
        return w[i] + frac * (w[i + 1] - w[i])
