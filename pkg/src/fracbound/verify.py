"""Self-checks with known answers: the plain quadratic and the renormalization map."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import GDConfig, run_gd, scan_learning_rates
from .fractal import boxcount_curve, fit_fractal_dimension
from .landscape import Family, LossSpec, RenormMap, renormalize


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def quadratic_sum(s: float, steps: int, x0: float = 1.0) -> float:
    """Closed-form sum of the post-update losses of gradient descent on x**2."""
    r2 = (1.0 - 2.0 * s) ** 2
    if r2 == 1.0:
        return steps * x0 * x0
    try:
        return x0 * x0 * r2 * (r2**steps - 1.0) / (r2 - 1.0)
    except OverflowError:
        return math.inf


def quadratic_critical_rate(threshold: float = 1e16, steps: int = 1000) -> float:
    """Smallest ``s > 1`` at which the quadratic's loss sum exceeds ``threshold`` (bisection)."""
    lo, hi = 1.0, 1.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if quadratic_sum(mid, steps) > threshold:
            hi = mid
        else:
            lo = mid
    return hi


def trajectory_deviation(spec: LossSpec, s: float, b: float, x0: float = 1.0,
                         steps: int = 100) -> float:
    """Largest relative deviation of ``x_k / x~_k`` from ``b`` over ``steps`` steps.

    Only steps where both trajectories are finite and outside the subnormal
    range are compared.
    """
    new, x0t, _ = renormalize(spec, [x0], RenormMap(b))
    a = run_gd(spec, GDConfig(x0=(x0,), steps=steps), s, record_trajectory=True).trajectory[:, 0]
    t = run_gd(new, GDConfig(x0=tuple(x0t), steps=steps), s, record_trajectory=True).trajectory[:, 0]
    n = min(a.size, t.size)
    a, t = a[:n], b * t[:n]
    tiny = 8 * np.finfo(float).tiny
    ok = np.isfinite(a) & np.isfinite(t) & (np.abs(a) > tiny) & (np.abs(t) > tiny)
    a, t = a[ok], t[ok]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(a != 0.0, np.abs(a - t) / np.abs(a), np.abs(t))
    return float(rel.max()) if rel.size else 0.0


def same_classification(spec: LossSpec, s: float, b: float, cfg: GDConfig = GDConfig(x0=(1.0,))) -> bool:
    """Whether the renormalized problem, with thresholds divided by ``b**2``, classifies alike."""
    new, x0t, zeta = renormalize(spec, cfg.initial_point(spec), RenormMap(b))
    cap = None if cfg.loss_cap is None else cfg.loss_cap / zeta
    cfg_t = replace(cfg, x0=tuple(x0t), sum_threshold=cfg.sum_threshold / zeta, loss_cap=cap)
    return run_gd(spec, cfg, s).classification == run_gd(new, cfg_t, s).classification


def selftest(n_max: int = 14, samples: int = 20, seed: int = 0) -> list[Check]:
    checks = []

    scan = scan_learning_rates(LossSpec(Family.QUADRATIC), n_max=n_max)
    flips = np.flatnonzero(scan.bits[1:] != scan.bits[:-1])
    s_star = quadratic_critical_rate()
    rates = scan.learning_rates()
    located = flips.size == 1 and rates[flips[0]] < s_star <= rates[flips[0] + 1]
    checks.append(Check("quadratic has one trainability boundary", bool(located),
                        f"{flips.size} transition(s); closed-form boundary s*={s_star:.6f}"))
    curve = boxcount_curve(scan)
    fit = fit_fractal_dimension(curve)
    checks.append(Check("quadratic box counts are 1 at every level >= 1",
                        bool(np.all(curve.counts[1:] == 1)) and fit.alpha == 0.0,
                        f"counts={curve.counts.tolist()} alpha={fit.alpha}"))

    rng = np.random.default_rng(seed)
    for family in (Family.ADDITIVE, Family.MULTIPLICATIVE):
        for b in (0.5, 2.0, 10.0):
            worst = 0.0
            agree = True
            for _ in range(samples):
                spec = LossSpec(family, rng.uniform(0.01, 0.2), rng.uniform(0.01, 1.0))
                s = rng.uniform(0.0, 1.5)
                worst = max(worst, trajectory_deviation(spec, s, b))
                agree &= same_classification(spec, s, b)
            checks.append(Check(f"{family.value} b={b:g} classification invariant", agree,
                                f"{samples} samples"))
            if math.log2(b).is_integer():
                # power-of-two rescaling is exact in binary arithmetic
                checks.append(Check(f"{family.value} b={b:g} trajectory rescales exactly",
                                    worst == 0.0, f"max relative deviation {worst:.3g}"))
    return checks
