"""Parameter sweeps built from scans and box-dimension fits.

Each cell of a sweep is an independent scan. Cells run one after another and
every scan is parallel internally, so all workers stay busy without nested
pools. A failing cell is recorded in ``failures`` and left as ``None``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import ClassifyMode, GDConfig, scan_learning_rates
from .errors import FracBoundError, UnsupportedOperationError, UsageError
from .fractal import DEFAULT_WINDOW, FractalFit, scan_dimension
from .landscape import (CRITICAL_ROUGHNESS, Family, LossSpec, fmax_convexity_boundary,
                        roughness, two_cosine_convexity_boundary)

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = tuple(np.linspace(0.01, 0.2, 10))
DEFAULT_LAMBDAS = tuple(np.linspace(0.01, 1.0, 10))


@dataclass(frozen=True)
class ScanSettings:
    config: GDConfig = GDConfig()
    s_min: float = 0.0
    s_max: float = 1.5
    n_max: int = 20
    window: int = DEFAULT_WINDOW


def measure(spec: LossSpec, settings: ScanSettings = ScanSettings()) -> FractalFit:
    """Scan one loss and fit its box dimension."""
    scan = scan_learning_rates(spec, settings.config, settings.s_min, settings.s_max, settings.n_max)
    return scan_dimension(scan, settings.window)


def _grid(specs, settings):
    fits = np.empty(specs.shape, dtype=object)
    failures = {}
    for idx in np.ndindex(specs.shape):
        try:
            fits[idx] = measure(specs[idx], settings)
        except (FracBoundError, MemoryError) as exc:
            log.warning("cell %s failed: %s", idx, exc)
            fits[idx] = None
            failures[idx] = str(exc)
        else:
            log.info("cell %s %s alpha=%.4f", idx, specs[idx], fits[idx].alpha)
    return fits, failures


def _alphas(fits) -> np.ndarray:
    return np.array([[math.nan if f is None else f.alpha for f in row] for row in fits])


def _stderrs(fits) -> np.ndarray:
    return np.array([[math.nan if f is None else f.stderr for f in row] for row in fits])


@dataclass
class SweepResult:
    family: Family
    epsilons: np.ndarray
    lambdas: np.ndarray
    fits: np.ndarray
    roughness: np.ndarray
    settings: ScanSettings
    failures: dict = field(default_factory=dict)

    @property
    def alpha(self) -> np.ndarray:
        return _alphas(self.fits)

    @property
    def stderr(self) -> np.ndarray:
        return _stderrs(self.fits)


def amplitude_wavelength_sweep(family: Family, eps_list=DEFAULT_EPSILONS, lambda_list=DEFAULT_LAMBDAS,
                               settings: ScanSettings = ScanSettings()) -> SweepResult:
    """Box dimension on the grid ``eps_list x lambda_list`` of a scalar family."""
    family = Family(family)
    if family not in (Family.ADDITIVE, Family.MULTIPLICATIVE):
        raise UsageError("amplitude/wavelength sweeps need the additive or multiplicative family")
    eps = np.asarray(eps_list, dtype=np.float64)
    lams = np.asarray(lambda_list, dtype=np.float64)
    if eps.size == 0 or lams.size == 0:
        raise UsageError("parameter lists must be non-empty")
    specs = np.empty((eps.size, lams.size), dtype=object)
    theta = np.empty((eps.size, lams.size))
    for i, e in enumerate(eps):
        for j, lam in enumerate(lams):
            specs[i, j] = LossSpec(family, e, lam)
            theta[i, j] = roughness(specs[i, j]).theta
    fits, failures = _grid(specs, settings)
    return SweepResult(family, eps, lams, fits, theta, settings, failures)


@dataclass
class CollapseSeries:
    theta: np.ndarray
    alpha: np.ndarray
    stderr: np.ndarray
    critical_theta: float | None

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.theta.tolist(), self.alpha.tolist(), self.stderr.tolist()))


def roughness_collapse(sweep: SweepResult) -> CollapseSeries:
    """Flatten a sweep to ``(theta, alpha)`` pairs sorted by roughness."""
    kind = Family(sweep.family).kind
    if kind is None:
        raise UnsupportedOperationError(f"{sweep.family} has no roughness invariant")
    theta = sweep.roughness.ravel()
    alpha = sweep.alpha.ravel()
    err = sweep.stderr.ravel()
    keep = ~np.isnan(alpha)
    order = np.argsort(theta[keep], kind="stable")
    return CollapseSeries(theta[keep][order], alpha[keep][order], err[keep][order],
                          CRITICAL_ROUGHNESS if kind == "additive" else None)


@dataclass
class TwoCosineSweepResult:
    lambda1: float
    lambda2: float
    eps1: np.ndarray
    eps2: np.ndarray
    fits: np.ndarray
    boundary: list[tuple[float, float | None]]
    settings: ScanSettings
    failures: dict = field(default_factory=dict)

    @property
    def alpha(self) -> np.ndarray:
        return _alphas(self.fits)

    @property
    def stderr(self) -> np.ndarray:
        return _stderrs(self.fits)


def two_cosine_sweep(eps1_list, eps2_list, settings: ScanSettings = ScanSettings(),
                     lambda1: float = 0.3, lambda2: float = 0.5) -> TwoCosineSweepResult:
    """Box dimension over ``(eps1, eps2)`` plus the convexity boundary along ``eps1_list``."""
    e1 = np.asarray(eps1_list, dtype=np.float64)
    e2 = np.asarray(eps2_list, dtype=np.float64)
    if e1.size == 0 or e2.size == 0:
        raise UsageError("parameter lists must be non-empty")
    specs = np.empty((e1.size, e2.size), dtype=object)
    for i, a in enumerate(e1):
        for j, b in enumerate(e2):
            specs[i, j] = LossSpec(Family.TWO_COSINE, a, lambda1, b, lambda2)
    fits, failures = _grid(specs, settings)
    boundary = [(float(a), two_cosine_convexity_boundary(lambda1, lambda2, a)) for a in e1]
    return TwoCosineSweepResult(lambda1, lambda2, e1, e2, fits, boundary, settings, failures)


@dataclass
class DimensionScanResult:
    family: Family
    dims: np.ndarray
    fits: list
    epsilon: float
    lam: float

    @property
    def alpha(self) -> np.ndarray:
        return np.array([math.nan if f is None else f.alpha for f in self.fits])

    @property
    def stderr(self) -> np.ndarray:
        return np.array([math.nan if f is None else f.stderr for f in self.fits])


def dimension_scan(family: Family, d_list, settings: ScanSettings = ScanSettings(),
                   epsilon: float = 0.2, lam: float = 0.1) -> DimensionScanResult:
    """Box dimension of a d-dimensional family for each ``d`` in ``d_list``.

    The starting point comes from ``settings.config.x0``; leave it unset to
    start every run at the all-ones vector.
    """
    family = Family(family)
    if family not in (Family.ADDITIVE_ND, Family.MULTIPLICATIVE_ND):
        raise UsageError("dimension scans need a d-dimensional family")
    dims = np.asarray(d_list, dtype=np.int64)
    if dims.size == 0 or np.any(np.diff(dims) <= 0):
        raise UsageError("d_list must be non-empty and strictly increasing")
    specs = np.array([LossSpec(family, epsilon, lam, dim=int(d)) for d in dims], dtype=object)
    fits, _ = _grid(specs, settings)
    return DimensionScanResult(family, dims, list(fits), epsilon, lam)


@dataclass
class InitialConditionScan:
    x0s: np.ndarray
    fits: list
    mean: float
    std: float

    @property
    def alpha(self) -> np.ndarray:
        return np.array([f.alpha for f in self.fits])


def initial_condition_scan(spec: LossSpec, x0_samples, settings: ScanSettings = ScanSettings()) -> InitialConditionScan:
    """Box dimension for each starting point; ``std`` is the sample standard deviation."""
    if spec.dim != 1:
        raise UsageError("initial-condition scans take a one-dimensional loss")
    x0s = np.asarray(x0_samples, dtype=np.float64).ravel()
    if x0s.size < 2:
        raise UsageError("need at least two initial conditions")
    fits = [measure(spec, replace(settings, config=replace(settings.config, x0=(float(x),))))
            for x in x0s]
    alphas = np.array([f.alpha for f in fits])
    return InitialConditionScan(x0s, fits, float(alphas.mean()), float(alphas.std(ddof=1)))


@dataclass
class ArtifactScanResult:
    f_max: float
    epsilons: np.ndarray
    lambdas: np.ndarray
    fits: np.ndarray
    boundary: np.ndarray
    failures: dict = field(default_factory=dict)

    @property
    def alpha(self) -> np.ndarray:
        return _alphas(self.fits)

    @property
    def stderr(self) -> np.ndarray:
        return _stderrs(self.fits)

    def below_boundary(self) -> np.ndarray:
        """Mask of cells whose amplitude lies under the convexity estimate for their wavelength."""
        return self.epsilons[:, None] < self.boundary[None, :]


def fmax_artifact_scan(f_max_list, eps_list, lambda_list,
                       settings: ScanSettings = ScanSettings()) -> list[ArtifactScanResult]:
    """Multiplicative-family sweeps classified by a loss cap, one per cap value.

    A small cap confines gradient descent to ``|x| < sqrt(f_max)`` where a
    weakly perturbed loss is still convex; the returned boundary is the
    amplitude at which that region turns non-convex.
    """
    eps = np.asarray(eps_list, dtype=np.float64)
    lams = np.asarray(lambda_list, dtype=np.float64)
    out = []
    for f_max in f_max_list:
        cfg = replace(settings.config, mode=ClassifyMode.LOSS_CAP, loss_cap=float(f_max))
        sweep = amplitude_wavelength_sweep(Family.MULTIPLICATIVE, eps, lams, replace(settings, config=cfg))
        boundary = np.array([fmax_convexity_boundary(lam, f_max) for lam in lams])
        out.append(ArtifactScanResult(float(f_max), eps, lams, sweep.fits, boundary, sweep.failures))
    return out
