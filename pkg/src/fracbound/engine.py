"""Gradient descent runs, divergence classification and learning-rate scans."""

from __future__ import annotations

import enum
import logging
import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels as K
from .errors import ResourceError, UsageError
from .landscape import LossSpec, as_point, loss_gradient

log = logging.getLogger(__name__)

#: Largest dyadic exponent accepted by :func:`scan_learning_rates`.
MAX_N_MAX = 24
THREADS_ENV = "FRACBOUND_THREADS"


class ClassifyMode(str, enum.Enum):
    SUM_THRESHOLD = "sum_threshold"
    LOSS_CAP = "loss_cap"


class Classification(str, enum.Enum):
    BOUNDED = "bounded"
    DIVERGENT = "divergent"


@dataclass(frozen=True)
class GDConfig:
    """Settings of a single gradient-descent run that do not depend on ``s``.

    ``x0=None`` means the all-ones point of whatever dimension the paired loss has.
    """

    x0: tuple[float, ...] | None = None
    steps: int = 1000
    mode: ClassifyMode = ClassifyMode.SUM_THRESHOLD
    sum_threshold: float = 1e16
    loss_cap: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", ClassifyMode(self.mode))
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))
        if int(self.steps) != self.steps or self.steps < 1:
            raise UsageError(f"steps must be a positive integer, got {self.steps!r}")
        object.__setattr__(self, "steps", int(self.steps))
        if not self.sum_threshold > 0:
            raise UsageError("sum_threshold must be positive")
        if self.loss_cap is not None and not self.loss_cap > 0:
            raise UsageError("loss_cap must be positive")
        if self.mode == ClassifyMode.LOSS_CAP and self.loss_cap is None:
            raise UsageError("loss_cap mode needs a loss_cap value")

    @property
    def limit(self) -> float:
        return self.loss_cap if self.mode == ClassifyMode.LOSS_CAP else self.sum_threshold

    def initial_point(self, spec: LossSpec) -> np.ndarray:
        if self.x0 is None:
            return np.ones(spec.dim)
        return as_point(spec, self.x0)

    def to_dict(self) -> dict:
        return {
            "x0": None if self.x0 is None else list(self.x0),
            "steps": self.steps,
            "classify_mode": self.mode.value,
            "sum_threshold": self.sum_threshold,
            "loss_cap": self.loss_cap,
        }

    @classmethod
    def from_dict(cls, data: dict) -> GDConfig:
        return cls(
            x0=data.get("x0"),
            steps=data.get("steps", 1000),
            mode=ClassifyMode(data.get("classify_mode", "sum_threshold")),
            sum_threshold=data.get("sum_threshold", 1e16),
            loss_cap=data.get("loss_cap"),
        )


@dataclass
class RunOutcome:
    """Result of one run.

    ``intensity`` is the sum of the per-step losses for a bounded run and the
    sum of their reciprocals for a divergent one, over executed steps.
    ``trajectory`` holds ``x^(0) .. x^(steps_executed)`` when requested.
    """

    classification: Classification
    intensity: float
    steps_executed: int
    final_loss: float
    trajectory: np.ndarray | None = field(default=None, repr=False)

    @property
    def divergent(self) -> bool:
        return self.classification == Classification.DIVERGENT


@dataclass(eq=False)
class DivergenceScan:
    """Classification of ``2**n_max + 1`` evenly spaced learning rates.

    ``bits[i]`` is True when the run at ``s_min + i*(s_max - s_min)/2**n_max``
    diverges.
    """

    spec: LossSpec
    config: GDConfig
    s_min: float
    s_max: float
    n_max: int
    bits: np.ndarray
    intensities: np.ndarray | None = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.bool_)
        if self.bits.shape != (2**self.n_max + 1,):
            raise UsageError(f"expected {2**self.n_max + 1} bits, got {self.bits.shape}")
        if self.intensities is not None:
            self.intensities = np.asarray(self.intensities, dtype=np.float64)
            if self.intensities.shape != self.bits.shape:
                raise UsageError("intensities must match the bit count")

    @property
    def size(self) -> int:
        return self.bits.size

    @property
    def spacing(self) -> float:
        return (self.s_max - self.s_min) / 2**self.n_max

    def learning_rates(self) -> np.ndarray:
        return self.s_min + np.arange(self.size, dtype=np.float64) * self.spacing

    def __eq__(self, other):
        if not isinstance(other, DivergenceScan):
            return NotImplemented
        same = (self.spec == other.spec and self.config == other.config
                and self.s_min == other.s_min and self.s_max == other.s_max
                and self.n_max == other.n_max and np.array_equal(self.bits, other.bits))
        if not same or (self.intensities is None) != (other.intensities is None):
            return False
        if self.intensities is None:
            return True
        # bitwise, so NaN payloads compare equal to themselves
        return np.array_equal(self.intensities.view(np.uint64), other.intensities.view(np.uint64))


def gd_step(spec: LossSpec, x, s: float) -> np.ndarray:
    """One update ``x - s*grad f(x)``."""
    x = as_point(spec, x)
    return x - s * loss_gradient(spec, x)


def run_gd(spec: LossSpec, cfg: GDConfig, s: float, record_trajectory: bool = False) -> RunOutcome:
    """Run ``cfg.steps`` iterations of gradient descent at learning rate ``s``.

    Any non-finite loss counts as divergence. In sum-threshold mode a run is
    divergent when the sum of the post-update losses exceeds the threshold;
    the loop stops early once no remaining step could bring it back under.
    In loss-cap mode the run stops at the first loss at or above the cap.
    """
    x0 = cfg.initial_point(spec)
    d = spec.dim
    traj = np.empty((cfg.steps + 1, d) if record_trajectory else (1, d))
    work = [np.empty(d) for _ in range(6)]
    div, inten, executed, final = K.run_one(
        *spec.kernel_params, x0, float(s), cfg.steps,
        cfg.mode == ClassifyMode.LOSS_CAP, float(cfg.limit), spec.loss_floor,
        *work, traj, record_trajectory)
    return RunOutcome(
        Classification.DIVERGENT if div else Classification.BOUNDED,
        float(inten), int(executed), float(final),
        traj[: executed + 1].copy() if record_trajectory else None,
    )


def worker_count() -> int:
    """Thread count for scans: ``$FRACBOUND_THREADS`` capped by what numba allows."""
    limit = numba.config.NUMBA_NUM_THREADS
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return limit
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, min(n, limit))


def scan_learning_rates(spec: LossSpec, cfg: GDConfig = GDConfig(), s_min: float = 0.0,
                        s_max: float = 1.5, n_max: int = 20,
                        with_intensity: bool = False) -> DivergenceScan:
    """Classify ``2**n_max + 1`` evenly spaced learning rates in ``[s_min, s_max]``.

    Grid point ``i`` sits at ``s_min + i*(s_max - s_min)/2**n_max``, so the
    points of a coarser level are exactly a subset of the finer grid. The
    result does not depend on the number of worker threads.
    """
    if not (math.isfinite(s_min) and math.isfinite(s_max) and s_min < s_max):
        raise UsageError(f"invalid learning-rate range [{s_min}, {s_max}]")
    if int(n_max) != n_max or not 1 <= n_max <= MAX_N_MAX:
        raise UsageError(f"n_max must be an integer in [1, {MAX_N_MAX}], got {n_max!r}")
    n_max = int(n_max)
    x0 = cfg.initial_point(spec)
    n_points = 2**n_max + 1
    try:
        bits = np.zeros(n_points, dtype=np.bool_)
        intensities = np.zeros(n_points, dtype=np.float64)
    except MemoryError as exc:
        raise ResourceError(f"cannot allocate a scan of {n_points} points") from exc

    threads = worker_count()
    n_chunks = min(n_points, max(64, 16 * threads))
    step = (s_max - s_min) / 2**n_max
    log.debug("scan %s n_max=%d threads=%d", spec, n_max, threads)
    previous = numba.get_num_threads()
    numba.set_num_threads(threads)
    try:
        K.scan(*spec.kernel_params, x0, float(s_min), step, n_points, cfg.steps,
               cfg.mode == ClassifyMode.LOSS_CAP, float(cfg.limit), spec.loss_floor,
               bits, intensities, n_chunks)
    except MemoryError as exc:
        raise ResourceError("scan ran out of memory") from exc
    finally:
        numba.set_num_threads(previous)
    return DivergenceScan(spec, cfg, float(s_min), float(s_max), n_max, bits,
                          intensities if with_intensity else None)
