"""Compiled 5-point stencil kernels for the screened Poisson operator.

Every vector passed here is zero on non-fluid nodes, so the stencil needs no
branching: neighbor values on Dirichlet nodes contribute nothing.
"""
import numba
import numpy as np


@numba.njit(cache=True)
def apply_operator(u, fl, c, out):
    """out = fl * ((1 + 4c) u - c * sum of neighbors); returns <out, u>."""
    ny, nx = u.shape
    d = 1.0 + 4.0 * c
    total = 0.0
    for j in range(1, ny - 1):
        acc = 0.0
        for i in range(1, nx - 1):
            v = fl[j, i] * (d * u[j, i] - c * (u[j - 1, i] + u[j + 1, i] + u[j, i - 1] + u[j, i + 1]))
            out[j, i] = v
            acc += v * u[j, i]
        total += acc
    return total


@numba.njit(cache=True)
def mic_diagonal(fl, c):
    """Pivots of the modified incomplete Cholesky factorization (row-major order)."""
    ny, nx = fl.shape
    d = np.ones((ny, nx))
    a = 1.0 + 4.0 * c
    c2 = c * c
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            if fl[j, i] > 0:
                v = a
                if fl[j - 1, i] > 0:
                    v -= c2 / d[j - 1, i]
                    if fl[j - 1, i + 1] > 0:
                        v -= c2 / d[j - 1, i]
                if fl[j, i - 1] > 0:
                    v -= c2 / d[j, i - 1]
                    if fl[j + 1, i - 1] > 0:
                        v -= c2 / d[j, i - 1]
                d[j, i] = v
    return d


@numba.njit(cache=True)
def mic_solve(r, fd, cd, z):
    """z = M^{-1} r with M = (D + L) D^{-1} (D + L^T); fd = fl/d, cd = c*fl/d."""
    ny, nx = r.shape
    for j in range(1, ny - 1):
        zl = 0.0
        for i in range(1, nx - 1):
            zl = fd[j, i] * r[j, i] + cd[j, i] * (z[j - 1, i] + zl)
            z[j, i] = zl
    for j in range(ny - 2, 0, -1):
        zr = 0.0
        for i in range(nx - 2, 0, -1):
            zr = z[j, i] + cd[j, i] * (z[j + 1, i] + zr)
            z[j, i] = zr


@numba.njit(cache=True)
def jacobi_solve(r, fd, cd, z):
    ny, nx = r.shape
    for j in range(ny):
        for i in range(nx):
            z[j, i] = fd[j, i] * r[j, i]


@numba.njit(cache=True)
def dot(a, b):
    ny, nx = a.shape
    total = 0.0
    for j in range(ny):
        acc = 0.0
        for i in range(nx):
            acc += a[j, i] * b[j, i]
        total += acc
    return total


@numba.njit(cache=True)
def axpy_pair(u, r, p, q, alpha):
    ny, nx = u.shape
    for j in range(ny):
        for i in range(nx):
            u[j, i] += alpha * p[j, i]
            r[j, i] -= alpha * q[j, i]


@numba.njit(cache=True)
def new_direction(p, z, beta):
    ny, nx = p.shape
    for j in range(ny):
        for i in range(nx):
            p[j, i] = z[j, i] + beta * p[j, i]


@numba.njit(cache=True)
def componentwise_residual(u, b, fl, monitor, c):
    """max |b - A u| / (|A| |u| + |b|) over monitored nodes."""
    ny, nx = u.shape
    d = 1.0 + 4.0 * c
    worst = 0.0
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            if monitor[j, i]:
                s = u[j - 1, i] + u[j + 1, i] + u[j, i - 1] + u[j, i + 1]
                sa = abs(u[j - 1, i]) + abs(u[j + 1, i]) + abs(u[j, i - 1]) + abs(u[j, i + 1])
                res = abs(b[j, i] - (d * u[j, i] - c * s))
                den = d * abs(u[j, i]) + c * sa + abs(b[j, i])
                if den > 0.0:
                    e = res / den
                    if e > worst:
                        worst = e
                elif res > 0.0:
                    return np.inf
    return worst
