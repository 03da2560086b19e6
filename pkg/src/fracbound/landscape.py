"""Perturbed-quadratic loss families and their analysis.

Families
--------
``QUADRATIC``          sum_i x_i**2 (any dimension)
``ADDITIVE``           x**2 + eps*cos(2*pi*x/lam)
``MULTIPLICATIVE``     x**2 * (1 + eps*cos(2*pi*x/lam))
``TWO_COSINE``         x**2 + eps*cos(2*pi*x/lam) + eps2*cos(2*pi*x/lam2)
``ADDITIVE_ND``        sum_i x_i**2 + eps*sum_i cos(2*pi*x_i/lam)
``MULTIPLICATIVE_ND``  (1 + eps*sum_i cos(2*pi*x_i/lam)) * sum_i x_i**2

Besides values and derivatives, this module provides the convexity analysis
of the scalar families, the renormalization map ``x -> x/b``, ``f -> f/b**2``
and the roughness invariants it leaves unchanged.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels as K
from .errors import UnsupportedOperationError, UsageError

TWO_PI = 2.0 * math.pi
#: Additive roughness at which x**2 + eps*cos(2*pi*x/lam) stops being convex.
CRITICAL_ROUGHNESS = 1.0 / (2.0 * math.pi**2)

#: Dense-grid density used by the convexity scans, in samples per unit length.
SAMPLES_PER_UNIT = 100_000


class Family(str, enum.Enum):
    QUADRATIC = "quadratic"
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"
    TWO_COSINE = "two_cosine"
    ADDITIVE_ND = "additive_nd"
    MULTIPLICATIVE_ND = "multiplicative_nd"

    @property
    def scalar_only(self) -> bool:
        return self in (Family.ADDITIVE, Family.MULTIPLICATIVE, Family.TWO_COSINE)

    @property
    def kind(self) -> str | None:
        """``"additive"``/``"multiplicative"`` for families with a roughness invariant."""
        if self in (Family.ADDITIVE, Family.ADDITIVE_ND):
            return "additive"
        if self in (Family.MULTIPLICATIVE, Family.MULTIPLICATIVE_ND):
            return "multiplicative"
        return None


_CODES = {
    Family.QUADRATIC: K.QUAD,
    Family.ADDITIVE: K.ADD,
    Family.ADDITIVE_ND: K.ADD,
    Family.MULTIPLICATIVE: K.MUL,
    Family.MULTIPLICATIVE_ND: K.MUL,
    Family.TWO_COSINE: K.TWO,
}


@dataclass(frozen=True)
class LossSpec:
    """One loss function instance.

    ``lam``/``lam2`` are the perturbation wavelengths (``lambda`` is a Python
    keyword). Fields a family does not use are ignored.
    """

    family: Family
    epsilon: float = 0.0
    lam: float = 1.0
    epsilon2: float = 0.0
    lam2: float = 1.0
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("epsilon", "lam", "epsilon2", "lam2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if int(self.dim) != self.dim or self.dim < 1:
            raise UsageError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        if not (self.lam > 0 and self.lam2 > 0):
            raise UsageError("wavelengths must be positive")
        if not (self.epsilon >= 0 and self.epsilon2 >= 0):
            raise UsageError("amplitudes must be non-negative")
        if not all(math.isfinite(v) for v in (self.epsilon, self.lam, self.epsilon2, self.lam2)):
            raise UsageError("loss parameters must be finite")
        if self.family.scalar_only and self.dim != 1:
            raise UsageError(f"{self.family.value} is a scalar family; dim must be 1")

    # packed form consumed by the compiled kernels
    @property
    def kernel_params(self) -> tuple[int, float, float, float, float]:
        code = _CODES[self.family]
        if code == K.QUAD:
            return code, 0.0, 0.0, 0.0, 0.0
        k2 = TWO_PI / self.lam2 if code == K.TWO else 0.0
        eps2 = self.epsilon2 if code == K.TWO else 0.0
        return code, self.epsilon, TWO_PI / self.lam, eps2, k2

    @property
    def loss_floor(self) -> float:
        """A lower bound on the loss over all of R^d (``-inf`` if unbounded)."""
        code = _CODES[self.family]
        if code == K.QUAD:
            return 0.0
        if code == K.ADD:
            return -self.dim * self.epsilon
        if code == K.TWO:
            return -(self.epsilon + self.epsilon2)
        return 0.0 if self.dim * self.epsilon <= 1.0 else -math.inf

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "epsilon2": self.epsilon2,
            "lambda2": self.lam2,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, data: dict) -> LossSpec:
        return cls(
            family=Family(data["family"]),
            epsilon=data.get("epsilon", 0.0),
            lam=data.get("lambda", 1.0),
            epsilon2=data.get("epsilon2", 0.0),
            lam2=data.get("lambda2", 1.0),
            dim=data.get("dim", 1),
        )


def as_point(spec: LossSpec, x) -> np.ndarray:
    """Coerce ``x`` to a float64 vector of length ``spec.dim``."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1 or arr.size != spec.dim:
        raise UsageError(f"expected a point of dimension {spec.dim}, got shape {np.shape(x)}")
    return np.ascontiguousarray(arr)


def loss_value(spec: LossSpec, x) -> float:
    """Loss at ``x`` (scalar or length-``dim`` vector)."""
    return float(K.loss(*spec.kernel_params, as_point(spec, x)))


def loss_gradient(spec: LossSpec, x) -> np.ndarray:
    """Analytic gradient at ``x``; always returns a length-``dim`` vector."""
    return K.gradient(*spec.kernel_params, as_point(spec, x))


def _require_scalar(spec: LossSpec, what: str) -> None:
    if spec.dim != 1:
        raise UnsupportedOperationError(f"{what} is only defined for one-dimensional losses")


def second_derivative(spec: LossSpec, x):
    """Exact second derivative of a one-dimensional loss.

    Vectorized over ``x``: a scalar in gives a float back, an array gives an
    array of the same shape.
    """
    _require_scalar(spec, "second_derivative")
    xa = np.asarray(x, dtype=np.float64)
    code, eps, k, eps2, k2 = spec.kernel_params
    if code == K.QUAD:
        out = np.full_like(xa, 2.0)
    elif code == K.ADD:
        out = 2.0 - eps * k * k * np.cos(k * xa)
    elif code == K.TWO:
        out = 2.0 - eps * k * k * np.cos(k * xa) - eps2 * k2 * k2 * np.cos(k2 * xa)
    else:
        p = k * xa
        c = np.cos(p)
        out = 2.0 + 2.0 * eps * c - 4.0 * eps * p * np.sin(p) - eps * p * p * c
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConvexityReport:
    min_second_derivative: float
    argmin_x: float
    region: tuple[float, float]
    is_convex: bool


def common_period(spec: LossSpec) -> float | None:
    """Smallest period shared by every cosine in ``spec`` (None for the quadratic).

    For two wavelengths the period is their least common multiple when they
    are commensurate with a small denominator, else ``100*max(lam, lam2)``.
    """
    if spec.family == Family.QUADRATIC:
        return None
    if spec.family != Family.TWO_COSINE:
        return spec.lam
    a = Fraction(spec.lam).limit_denominator(10_000)
    b = Fraction(spec.lam2).limit_denominator(10_000)
    fallback = 100.0 * max(spec.lam, spec.lam2)
    if not (math.isclose(float(a), spec.lam, rel_tol=1e-12) and math.isclose(float(b), spec.lam2, rel_tol=1e-12)):
        return fallback
    num = math.lcm(a.numerator * b.denominator, b.numerator * a.denominator)
    period = num / (a.denominator * b.denominator)
    return period if period <= fallback else fallback


def min_second_derivative(spec: LossSpec, region: tuple[float, float] | None = None,
                          samples: int | None = None) -> ConvexityReport:
    """Minimum of the second derivative over ``region``.

    The minimum is located on a dense grid of ``samples`` evenly spaced points
    and then refined on the bracketing grid interval (bounded scalar search,
    absolute tolerance 1e-10 in x).

    Parameters
    ----------
    spec : LossSpec
        One-dimensional loss.
    region : (x_lo, x_hi), optional
        Defaults to one full period of the perturbation centred at 0.
    samples : int, optional
        Grid size; defaults to ``SAMPLES_PER_UNIT`` per unit length (at least 1000).
    """
    _require_scalar(spec, "min_second_derivative")
    if region is None:
        period = common_period(spec) or 2.0
        region = (-period / 2.0, period / 2.0)
    lo, hi = float(region[0]), float(region[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise UsageError(f"invalid region [{lo}, {hi}]")
    if samples is None:
        samples = max(1000, int(math.ceil(SAMPLES_PER_UNIT * (hi - lo))))
    if samples < 2:
        raise UsageError("samples must be at least 2")

    xs = np.linspace(lo, hi, samples)
    vals = second_derivative(spec, xs)
    i = int(np.argmin(vals))
    best_x, best_v = float(xs[i]), float(vals[i])

    a, b = float(xs[max(i - 1, 0)]), float(xs[min(i + 1, samples - 1)])
    res = minimize_scalar(lambda t: second_derivative(spec, t), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-10})
    if res.fun < best_v:
        best_x, best_v = float(res.x), float(res.fun)
    return ConvexityReport(best_v, best_x, (lo, hi), best_v >= 0.0)


@dataclass(frozen=True)
class RoughnessValue:
    theta: float
    kind: str


def roughness(spec: LossSpec) -> RoughnessValue:
    """Renormalization-invariant roughness: eps/lam**2 (additive) or eps (multiplicative)."""
    kind = spec.family.kind
    if kind == "additive":
        return RoughnessValue(spec.epsilon / spec.lam**2, kind)
    if kind == "multiplicative":
        return RoughnessValue(spec.epsilon, kind)
    raise UnsupportedOperationError(f"no single roughness invariant for {spec.family.value}")


@dataclass(frozen=True)
class RenormMap:
    """Rescaling ``x -> x/b`` together with the loss rescaling ``f -> f/zeta``."""

    b: float

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise UsageError(f"rescale factor must be positive and finite, got {self.b}")

    @property
    def zeta(self) -> float:
        return self.b * self.b


def renormalize(spec: LossSpec, x0, rmap: RenormMap) -> tuple[LossSpec, np.ndarray, float]:
    """Map ``(spec, x0)`` to the equivalent problem in rescaled coordinates.

    Gradient descent at the same learning rate on the returned spec, started
    from the returned point, follows the original trajectory divided by ``b``;
    every loss value is divided by the returned ``zeta``.
    """
    if not isinstance(rmap, RenormMap):
        rmap = RenormMap(float(rmap))
    b = rmap.b
    fam = spec.family
    if fam in (Family.ADDITIVE, Family.TWO_COSINE):
        new = replace(spec, epsilon=spec.epsilon / b**2, lam=spec.lam / b,
                      epsilon2=spec.epsilon2 / b**2, lam2=spec.lam2 / b)
    elif fam == Family.MULTIPLICATIVE:
        new = replace(spec, lam=spec.lam / b, lam2=spec.lam2 / b)
    elif fam == Family.QUADRATIC and spec.dim == 1:
        new = spec
    else:
        raise UnsupportedOperationError("renormalization is defined for scalar families only")
    return new, as_point(spec, x0) / b, rmap.zeta


def two_cosine_convexity_boundary(lambda1: float, lambda2: float, epsilon1: float,
                                  tol: float = 1e-12) -> float | None:
    """Amplitude ``eps2`` at which the two-cosine loss stops being convex.

    Solved by bisection on ``eps2`` with the minimum second derivative taken
    over one common period. Returns ``None`` when ``epsilon1`` alone already
    makes the loss non-convex.
    """
    if not (lambda1 > 0 and lambda2 > 0 and epsilon1 >= 0):
        raise UsageError("wavelengths must be positive and epsilon1 non-negative")

    def min_curv(eps2: float) -> float:
        spec = LossSpec(Family.TWO_COSINE, epsilon1, lambda1, eps2, lambda2)
        return min_second_derivative(spec).min_second_derivative

    if min_curv(0.0) < 0.0:
        return None
    lo, hi = 0.0, 2.0 / (TWO_PI / lambda2) ** 2
    while min_curv(hi) >= 0.0:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if min_curv(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fmax_convexity_boundary(lam: float, f_max: float) -> float:
    """Multiplicative amplitude at which the loss becomes non-convex within ``|x| < sqrt(f_max)``.

    Uses the large-``|x|`` estimate ``2 - eps*f_max*(2*pi/lam)**2`` of the
    minimum second derivative.
    """
    if not (lam > 0 and f_max > 0):
        raise UsageError("lam and f_max must be positive")
    return lam**2 / (2.0 * math.pi**2) / f_max
