"""Box counting on divergence scans.

A scan with ``2**n_max + 1`` points is coarse-grained to level ``n`` by
keeping every ``2**(n_max - n)``-th point. A segment between neighbouring
kept points is a boundary segment when its two ends disagree. The box
dimension is the least-squares slope of ``log2 |B_N|`` against ``log2 N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .engine import DivergenceScan
from .errors import UsageError

#: Number of finest levels fitted by default.
DEFAULT_WINDOW = 8


@dataclass(frozen=True)
class BoxCountCurve:
    levels: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "levels", np.asarray(self.levels, dtype=np.int64))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))
        if self.levels.shape != self.counts.shape:
            raise UsageError("levels and counts must have the same length")
        if np.any(np.diff(self.levels) <= 0):
            raise UsageError("levels must be strictly increasing")
        if np.any(self.counts < 0) or np.any(self.counts > self.sizes):
            raise UsageError("counts must lie in [0, 2**n]")

    @property
    def sizes(self) -> np.ndarray:
        """Segment counts ``N = 2**n`` per level."""
        return np.left_shift(1, self.levels)

    @property
    def entries(self) -> list[tuple[int, int, int]]:
        return [(int(n), int(N), int(c)) for n, N, c in zip(self.levels, self.sizes, self.counts)]


@dataclass(frozen=True)
class FractalFit:
    alpha: float
    stderr: float
    window: tuple[int, int]
    r_points: int


def level_indices(n_max: int, n: int) -> np.ndarray:
    """Fine-grid indices kept at coarse level ``n``."""
    return np.arange(2**n + 1, dtype=np.int64) << (n_max - n)


def boundary_segment_count(scan: DivergenceScan, n: int) -> int:
    """Number of boundary segments ``|B_N|`` at level ``n`` (``N = 2**n``)."""
    if int(n) != n or not 0 <= n <= scan.n_max:
        raise UsageError(f"level must be in [0, {scan.n_max}], got {n!r}")
    kept = scan.bits[:: 1 << (scan.n_max - int(n))]
    return int(np.count_nonzero(kept[1:] != kept[:-1]))


def boxcount_curve(scan: DivergenceScan) -> BoxCountCurve:
    levels = np.arange(scan.n_max + 1)
    return BoxCountCurve(levels, [boundary_segment_count(scan, n) for n in levels])


def default_window(curve: BoxCountCurve, size: int = DEFAULT_WINDOW) -> tuple[int, int]:
    top = int(curve.levels.max())
    return max(int(curve.levels.min()), top - size + 1), top


def fit_fractal_dimension(curve: BoxCountCurve, window: tuple[int, int] | None = None) -> FractalFit:
    """Least-squares box dimension over the levels ``window = (lo, hi)`` inclusive.

    Levels with zero boundary segments are dropped. With fewer than three
    usable levels, or when no usable level has more than one segment, the
    boundary is treated as non-fractal and ``alpha = stderr = 0``.
    """
    if window is None:
        window = default_window(curve)
    lo, hi = int(window[0]), int(window[1])
    if lo > hi:
        raise UsageError(f"empty fit window {window}")
    have = set(curve.levels.tolist())
    if not all(n in have for n in range(lo, hi + 1)):
        raise UsageError(f"fit window {window} is not covered by the curve levels")

    inside = (curve.levels >= lo) & (curve.levels <= hi) & (curve.counts >= 1)
    n_used = int(np.count_nonzero(inside))
    if n_used < 3 or np.all(curve.counts[inside] <= 1):
        return FractalFit(0.0, 0.0, (lo, hi), n_used)
    res = linregress(curve.levels[inside].astype(np.float64), np.log2(curve.counts[inside]))
    return FractalFit(float(res.slope), float(res.stderr), (lo, hi), n_used)


def scan_dimension(scan: DivergenceScan, window_size: int = DEFAULT_WINDOW) -> FractalFit:
    """Box-count ``scan`` and fit its finest ``window_size`` levels."""
    curve = boxcount_curve(scan)
    return fit_fractal_dimension(curve, default_window(curve, window_size))
