"""Compiled inner loops for the multi-start search.

``simplex_search`` is written once in plain Python.  It runs interpreted
for arbitrary Python objectives and is compiled by numba, as
``simplex_search_jit``, when the objective is itself a numba function.
The compiled penalty mirrors ``cartan.reconstruct`` entry by entry; the
test suite checks the two against each other.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# termination status codes
CONVERGED = 0
MAX_ITER = 1
NONFINITE = 2

MODE_EXACT = 0
MODE_PHASE = 1


def simplex_search(f, args, x0, step, ftol, maxiter):
    """Downhill simplex with reflection 1, expansion 2, contraction 1/2, shrink 1/2.

    Stops when the spread of simplex values drops below ``ftol`` or after
    ``maxiter`` iterations.  Returns ``(x, fx, iterations, status)``.
    """
    n = x0.shape[0]
    sim = np.empty((n + 1, n))
    fs = np.empty(n + 1)
    sim[0] = x0
    for i in range(n):
        sim[i + 1] = x0
        sim[i + 1, i] += step
    for i in range(n + 1):
        fs[i] = f(sim[i], args)
        if not np.isfinite(fs[i]):
            return sim[i].copy(), fs[i], 0, NONFINITE
    it = 0
    status = MAX_ITER
    while True:
        order = np.argsort(fs, kind="mergesort")
        sim = sim[order]
        fs = fs[order]
        if fs[n] - fs[0] < ftol:
            status = CONVERGED
            break
        if it >= maxiter:
            break
        it += 1
        cen = np.zeros(n)
        for i in range(n):
            cen += sim[i]
        cen /= n
        xr = cen + (cen - sim[n])
        fr = f(xr, args)
        if not np.isfinite(fr):
            return xr, fr, it, NONFINITE
        if fr < fs[0]:
            xe = cen + 2.0 * (xr - cen)
            fe = f(xe, args)
            if not np.isfinite(fe):
                return xe, fe, it, NONFINITE
            if fe < fr:
                sim[n] = xe
                fs[n] = fe
            else:
                sim[n] = xr
                fs[n] = fr
        elif fr < fs[n - 1]:
            sim[n] = xr
            fs[n] = fr
        else:
            if fr < fs[n]:
                xc = cen + 0.5 * (xr - cen)
                fc = f(xc, args)
                accept = fc <= fr
            else:
                xc = cen + 0.5 * (sim[n] - cen)
                fc = f(xc, args)
                accept = fc < fs[n]
            if not np.isfinite(fc):
                return xc, fc, it, NONFINITE
            if accept:
                sim[n] = xc
                fs[n] = fc
            else:
                for i in range(1, n + 1):
                    sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                    fs[i] = f(sim[i], args)
                    if not np.isfinite(fs[i]):
                        return sim[i].copy(), fs[i], it, NONFINITE
    return sim[0].copy(), fs[0], it, status


simplex_search_jit = njit(cache=True)(simplex_search)


@njit(cache=True)
def _su2(a, b, c):
    r = np.sqrt(a * a + b * b + c * c)
    if r < 1e-12:
        cr = 1.0
        sr = 1.0
    else:
        cr = np.cos(r)
        sr = np.sin(r) / r
    m = np.empty((2, 2), np.complex128)
    m[0, 0] = cr + 1j * sr * c
    m[0, 1] = 1j * sr * (a - 1j * b)
    m[1, 0] = 1j * sr * (a + 1j * b)
    m[1, 1] = cr - 1j * sr * c
    return m


@njit(cache=True)
def _kron(a, b):
    out = np.empty((4, 4), np.complex128)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    out[2 * i + k, 2 * j + l] = a[i, j] * b[k, l]
    return out


@njit(cache=True)
def _cartan(c1, c2, c3):
    u = np.zeros((4, 4), np.complex128)
    even = np.exp(1j * c3)
    odd = np.exp(-1j * c3)
    d = c1 - c2
    s = c1 + c2
    u[0, 0] = even * np.cos(d)
    u[3, 3] = u[0, 0]
    u[0, 3] = even * 1j * np.sin(d)
    u[3, 0] = u[0, 3]
    u[1, 1] = odd * np.cos(s)
    u[2, 2] = u[1, 1]
    u[1, 2] = odd * 1j * np.sin(s)
    u[2, 1] = u[1, 2]
    return u


@njit(cache=True)
def reconstruct_jit(x):
    """``K2 U_J(t) K1`` from the flat 15-vector (see ``ControlParams.to_vector``)."""
    k1 = _kron(_su2(x[0], x[1], x[2]), _su2(x[3], x[4], x[5]))
    k2 = _kron(_su2(x[6], x[7], x[8]), _su2(x[9], x[10], x[11]))
    h = -0.5 * np.pi
    return k2 @ _cartan(h * x[12], h * x[13], h * x[14]) @ k1


@njit(cache=True)
def distance_jit(u, target, mode):
    s = 0.0
    if mode == MODE_EXACT:
        for i in range(4):
            for j in range(4):
                z = u[i, j] - target[i, j]
                s += z.real * z.real + z.imag * z.imag
        return np.sqrt(s)
    tr = 0j
    for i in range(4):
        for j in range(4):
            tr += np.conj(target[i, j]) * u[i, j]
    mag = np.abs(tr)
    phase = tr / mag if mag > 0.0 else 1.0 + 0j
    for i in range(4):
        for j in range(4):
            z = u[i, j] - phase * target[i, j]
            s += z.real * z.real + z.imag * z.imag
    return np.sqrt(s)


@njit(cache=True)
def objective_jit(x, args):
    """Penalty plus optional time weight; ``args = (target, mode, weight, nonneg)``."""
    target, mode, weight, nonneg = args
    if nonneg:
        y = x.copy()
        for k in range(12, 15):
            y[k] = abs(y[k])
        u = reconstruct_jit(y)
    else:
        u = reconstruct_jit(x)
    val = distance_jit(u, target, mode)
    if weight != 0.0:
        val += weight * (abs(x[12]) + abs(x[13]) + abs(x[14]))
    return val
