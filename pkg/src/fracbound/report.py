"""CSV tables for curves and sweeps, and the PPM intensity strip."""

from __future__ import annotations

import csv
import io
import math
from functools import singledispatch

import numpy as np

from .engine import DivergenceScan
from .errors import UsageError
from .experiments import (ArtifactScanResult, CollapseSeries, DimensionScanResult,
                          InitialConditionScan, SweepResult, TwoCosineSweepResult)
from .fractal import BoxCountCurve
from .scanfile import atomic_write_bytes


def fmt(x) -> str:
    """Shortest-safe text for a number: integers as-is, floats at 17 significant digits."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return "nan"
    return format(float(x), ".17g")


def _fit_cols(fit):
    return (math.nan, math.nan) if fit is None else (fit.alpha, fit.stderr)


@singledispatch
def csv_rows(result) -> tuple[list[str], list[tuple]]:
    """Header and rows for ``result``."""
    raise UsageError(f"no CSV layout for {type(result).__name__}")


@csv_rows.register
def _(result: BoxCountCurve):
    return ["n", "N", "count"], list(result.entries)


@csv_rows.register
def _(result: SweepResult):
    rows = []
    for i, eps in enumerate(result.epsilons):
        for j, lam in enumerate(result.lambdas):
            rows.append((eps, lam, result.roughness[i, j], *_fit_cols(result.fits[i, j])))
    return ["eps", "lambda", "theta", "alpha", "stderr"], rows


@csv_rows.register
def _(result: CollapseSeries):
    return ["theta", "alpha", "stderr"], result.points


@csv_rows.register
def _(result: DimensionScanResult):
    return ["d", "alpha", "stderr"], [(int(d), *_fit_cols(f)) for d, f in zip(result.dims, result.fits)]


@csv_rows.register
def _(result: InitialConditionScan):
    return ["x0", "alpha", "stderr"], [(x, *_fit_cols(f)) for x, f in zip(result.x0s, result.fits)]


@csv_rows.register
def _(result: ArtifactScanResult):
    rows = []
    for i, eps in enumerate(result.epsilons):
        for j, lam in enumerate(result.lambdas):
            rows.append((result.f_max, eps, lam, result.boundary[j], *_fit_cols(result.fits[i, j])))
    return ["f_max", "eps", "lambda", "boundary_eps", "alpha", "stderr"], rows


@csv_rows.register
def _(result: TwoCosineSweepResult):
    boundary = dict(result.boundary)
    rows = []
    for i, e1 in enumerate(result.eps1):
        for j, e2 in enumerate(result.eps2):
            rows.append((e1, e2, boundary.get(float(e1)), *_fit_cols(result.fits[i, j])))
    return ["eps1", "eps2", "boundary_eps2", "alpha", "stderr"], rows


def to_csv(result) -> str:
    header, rows = csv_rows(result)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def emit_csv(result, path) -> None:
    atomic_write_bytes(path, to_csv(result).encode("utf-8"))


def _channel(values: np.ndarray) -> np.ndarray:
    """Log-scale ``values`` into 64..255 using their own min/max."""
    out = np.full(values.shape, 255, dtype=np.uint8)
    if values.size == 0:
        return out
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log10(values)
    finite = np.isfinite(logs)
    if not finite.any():
        return out
    lo, hi = logs[finite].min(), logs[finite].max()
    logs = np.where(np.isnan(logs), lo, logs)
    logs = np.clip(logs, lo, hi)
    if hi > lo:
        out[:] = np.rint(64 + 191 * (logs - lo) / (hi - lo)).astype(np.uint8)
    return out


def intensity_strip(scan: DivergenceScan, height: int = 32, width: int | None = None) -> np.ndarray:
    """RGB image ``(height, width, 3)``: bounded points in blue, divergent in red.

    With ``width`` smaller than the grid, columns sample evenly spaced grid points.
    """
    if scan.intensities is None:
        raise UsageError("scan has no intensities; rescan with intensities enabled")
    if height < 1:
        raise UsageError("height must be positive")
    idx = np.arange(scan.size)
    if width is not None:
        if not 1 <= width <= scan.size:
            raise UsageError(f"width must be in [1, {scan.size}]")
        idx = np.rint(np.linspace(0, scan.size - 1, width)).astype(np.int64)
    bits = scan.bits[idx]
    inten = scan.intensities[idx]
    row = np.zeros((idx.size, 3), dtype=np.uint8)
    row[~bits, 2] = _channel(inten[~bits])
    row[bits, 0] = _channel(inten[bits])
    return np.broadcast_to(row, (height, idx.size, 3)).copy()


def encode_ppm(img: np.ndarray) -> bytes:
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def render_intensity_strip(scan: DivergenceScan, path, height: int = 32, width: int | None = None) -> None:
    atomic_write_bytes(path, encode_ppm(intensity_strip(scan, height, width)))
