"""Compiled loss formulas and the gradient-descent inner loop.

Every public entry point that evaluates a loss or a gradient goes through the
helpers here, so single runs, dense scans and the Python-level API agree
bit for bit.

Loss families are passed as small integer codes plus a flat parameter list
``(eps1, k1, eps2, k2)`` where ``k = 2*pi/lambda`` is the angular wavenumber.
The additive and multiplicative d-dimensional families reduce exactly to
their scalar counterparts at d = 1, so they share codes.
"""

import math

import numpy as np
from numba import njit, prange

QUAD = 0
ADD = 1
MUL = 2
TWO = 3

_JIT = dict(cache=True, error_model="numpy")


@njit(**_JIT)
def trig(code, k1, k2, x, c1, s1, c2, s2):
    """Fill cos/sin of the phases ``k*x`` for the families that need them."""
    if code == QUAD:
        return
    for i in range(x.size):
        p = k1 * x[i]
        c1[i] = math.cos(p)
        s1[i] = math.sin(p)
    if code == TWO:
        for i in range(x.size):
            p = k2 * x[i]
            c2[i] = math.cos(p)
            s2[i] = math.sin(p)


@njit(**_JIT)
def loss_from_trig(code, eps1, eps2, x, c1, c2):
    sq = 0.0
    for i in range(x.size):
        sq += x[i] * x[i]
    if code == QUAD:
        return sq
    if code == TWO:
        return sq + eps1 * c1[0] + eps2 * c2[0]
    cs = 0.0
    for i in range(x.size):
        cs += c1[i]
    if code == ADD:
        return sq + eps1 * cs
    return (1.0 + eps1 * cs) * sq


@njit(**_JIT)
def grad_from_trig(code, eps1, k1, eps2, k2, x, c1, s1, c2, s2, out):
    if code == QUAD:
        for i in range(x.size):
            out[i] = 2.0 * x[i]
    elif code == ADD:
        a1 = eps1 * k1
        for i in range(x.size):
            out[i] = 2.0 * x[i] - a1 * s1[i]
    elif code == MUL:
        a1 = eps1 * k1
        sq = 0.0
        cs = 0.0
        for i in range(x.size):
            sq += x[i] * x[i]
            cs += c1[i]
        m = 1.0 + eps1 * cs
        for i in range(x.size):
            out[i] = 2.0 * x[i] * m - sq * a1 * s1[i]
    else:
        out[0] = 2.0 * x[0] - eps1 * k1 * s1[0] - eps2 * k2 * s2[0]


@njit(**_JIT)
def loss(code, eps1, k1, eps2, k2, x):
    d = x.size
    c1 = np.empty(d)
    s1 = np.empty(d)
    c2 = np.empty(d)
    s2 = np.empty(d)
    trig(code, k1, k2, x, c1, s1, c2, s2)
    return loss_from_trig(code, eps1, eps2, x, c1, c2)


@njit(**_JIT)
def gradient(code, eps1, k1, eps2, k2, x):
    d = x.size
    c1 = np.empty(d)
    s1 = np.empty(d)
    c2 = np.empty(d)
    s2 = np.empty(d)
    out = np.empty(d)
    trig(code, k1, k2, x, c1, s1, c2, s2)
    grad_from_trig(code, eps1, k1, eps2, k2, x, c1, s1, c2, s2, out)
    return out


@njit(**_JIT)
def run_one(code, eps1, k1, eps2, k2, x0, s, steps, cap_mode, limit, floor,
            x, g, c1, s1, c2, s2, traj, record):
    """One gradient-descent run.

    ``limit`` is the loss cap in cap mode and the sum threshold otherwise.
    ``floor`` is a lower bound on any single loss value (<= 0, or -inf when
    none exists); it lets the sum mode stop as soon as the final sum is
    guaranteed to end above the threshold.

    Returns ``(divergent, intensity, steps_executed, final_loss)``.
    """
    d = x.size
    for j in range(d):
        x[j] = x0[j]
    if record:
        for j in range(d):
            traj[0, j] = x[j]
    trig(code, k1, k2, x, c1, s1, c2, s2)

    total = 0.0
    inv = 0.0
    f = 0.0
    divergent = False
    stationary = False
    executed = 0
    for i in range(1, steps + 1):
        if not stationary:
            grad_from_trig(code, eps1, k1, eps2, k2, x, c1, s1, c2, s2, g)
            moved = False
            for j in range(d):
                xn = x[j] - s * g[j]
                if xn != x[j]:
                    moved = True
                x[j] = xn
            # an unmoved iterate is a fixed point of the map: the loss repeats
            if moved or i == 1:
                trig(code, k1, k2, x, c1, s1, c2, s2)
                f = loss_from_trig(code, eps1, eps2, x, c1, c2)
            stationary = not moved
        executed = i
        if record:
            for j in range(d):
                traj[i, j] = x[j]
        if not math.isfinite(f):
            divergent = True
            break
        total += f
        inv += 1.0 / f
        if cap_mode:
            if f >= limit:
                divergent = True
                break
        else:
            remaining = steps - i
            if remaining == 0:
                if total > limit:
                    divergent = True
            elif floor > -math.inf:
                if total + remaining * floor > limit:
                    divergent = True
                    break
    intensity = inv if divergent else total
    return divergent, intensity, executed, f


@njit(**_JIT)
def _loss1(code, eps1, eps2, x, c1, c2):
    # mirrors loss_from_trig at d = 1, operation for operation
    sq = x * x
    if code == QUAD:
        return sq
    if code == ADD:
        return sq + eps1 * c1
    if code == MUL:
        return (1.0 + eps1 * c1) * sq
    return sq + eps1 * c1 + eps2 * c2


@njit(**_JIT)
def _grad1(code, eps1, k1, eps2, k2, x, c1, s1, c2, s2):
    # mirrors grad_from_trig at d = 1, operation for operation
    if code == QUAD:
        return 2.0 * x
    if code == ADD:
        return 2.0 * x - (eps1 * k1) * s1
    if code == MUL:
        return 2.0 * x * (1.0 + eps1 * c1) - x * x * (eps1 * k1) * s1
    return 2.0 * x - eps1 * k1 * s1 - eps2 * k2 * s2


@njit(**_JIT)
def run_one_scalar(code, eps1, k1, eps2, k2, x0, s, steps, cap_mode, limit, floor):
    """Scalar specialisation of :func:`run_one` without trajectory recording."""
    x = x0
    c1 = s1 = c2 = s2 = 0.0
    if code != QUAD:
        c1 = math.cos(k1 * x)
        s1 = math.sin(k1 * x)
        if code == TWO:
            c2 = math.cos(k2 * x)
            s2 = math.sin(k2 * x)

    total = 0.0
    inv = 0.0
    f = 0.0
    divergent = False
    stationary = False
    executed = 0
    for i in range(1, steps + 1):
        if not stationary:
            xn = x - s * _grad1(code, eps1, k1, eps2, k2, x, c1, s1, c2, s2)
            moved = xn != x
            x = xn
            if moved or i == 1:
                if code != QUAD:
                    c1 = math.cos(k1 * x)
                    s1 = math.sin(k1 * x)
                    if code == TWO:
                        c2 = math.cos(k2 * x)
                        s2 = math.sin(k2 * x)
                f = _loss1(code, eps1, eps2, x, c1, c2)
            stationary = not moved
        executed = i
        if not math.isfinite(f):
            divergent = True
            break
        total += f
        inv += 1.0 / f
        if cap_mode:
            if f >= limit:
                divergent = True
                break
        else:
            remaining = steps - i
            if remaining == 0:
                if total > limit:
                    divergent = True
            elif floor > -math.inf:
                if total + remaining * floor > limit:
                    divergent = True
                    break
    intensity = inv if divergent else total
    return divergent, intensity, executed, f


@njit(parallel=True, **_JIT)
def scan(code, eps1, k1, eps2, k2, x0, s_min, step, n_points, steps,
         cap_mode, limit, floor, bits, intensities, n_chunks):
    """Classify every learning rate ``s_min + i*step`` for ``i < n_points``.

    Each grid point is independent, so chunk scheduling never affects the
    result.
    """
    d = x0.size
    chunk = (n_points + n_chunks - 1) // n_chunks
    for c in prange(n_chunks):
        lo = c * chunk
        hi = min(lo + chunk, n_points)
        x = np.empty(d)
        g = np.empty(d)
        cc1 = np.empty(d)
        ss1 = np.empty(d)
        cc2 = np.empty(d)
        ss2 = np.empty(d)
        traj = np.empty((1, d))
        for i in range(lo, hi):
            s = s_min + i * step
            if d == 1:
                div, inten, _, _ = run_one_scalar(code, eps1, k1, eps2, k2, x0[0], s,
                                                  steps, cap_mode, limit, floor)
                bits[i] = div
                intensities[i] = inten
                continue
            div, inten, _, _ = run_one(code, eps1, k1, eps2, k2, x0, s, steps,
                                       cap_mode, limit, floor, x, g, cc1, ss1,
                                       cc2, ss2, traj, False)
            bits[i] = div
            intensities[i] = inten
