"""Numerical hot loops with optional numba acceleration.

Every kernel has a pure-numpy implementation. When numba is importable and
the environment variable ``VORTEXLAB_DISABLE_NUMBA`` is unset (or "0"), the
jitted variant is used; the flag exists so results can be reproduced and
benchmarked on the interpreter path. Kernels are deterministic: identical
inputs give identical outputs on both paths.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


USE_NUMBA = HAS_NUMBA and os.environ.get("VORTEXLAB_DISABLE_NUMBA", "0") != "1"


# ---------------------------------------------------------------------------
# Gradient flows. The sphere field is v(x) = s * (e_z - z x), the linear field
# v(x)_j = -s * w_j x_j; both are the (signed) metric gradient of the moment
# map Hamiltonian. Steps are classical RK4 with a fixed step count so that
# both backends agree bitwise in exact arithmetic order.
# ---------------------------------------------------------------------------


def _rk4_sphere_py(x0, s, dt, nsteps, kicks):
    out = np.empty((nsteps + 1, 3))
    x = x0.astype(np.float64).copy()
    x /= np.sqrt(x[0] ** 2 + x[1] ** 2 + x[2] ** 2)
    out[0] = x

    def field(p, k):
        z = p[2]
        v = np.array([-z * p[0], -z * p[1], 1.0 - z * z]) * s
        v = v + k - (k[0] * p[0] + k[1] * p[1] + k[2] * p[2]) * p
        return v

    for n in range(nsteps):
        k = kicks[n]
        k1 = field(x, k)
        k2 = field(x + 0.5 * dt * k1, k)
        k3 = field(x + 0.5 * dt * k2, k)
        k4 = field(x + dt * k3, k)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x /= np.sqrt(x[0] ** 2 + x[1] ** 2 + x[2] ** 2)
        out[n + 1] = x
    return out


@njit(cache=True)
def _rk4_sphere_nb(x0, s, dt, nsteps, kicks):  # pragma: no cover - jitted
    out = np.empty((nsteps + 1, 3))
    x = np.empty(3)
    nrm = np.sqrt(x0[0] ** 2 + x0[1] ** 2 + x0[2] ** 2)
    for i in range(3):
        x[i] = x0[i] / nrm
        out[0, i] = x[i]
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    tmp = np.empty(3)
    for n in range(nsteps):
        kx, ky, kz = kicks[n, 0], kicks[n, 1], kicks[n, 2]
        for stage in range(4):
            if stage == 0:
                for i in range(3):
                    tmp[i] = x[i]
            elif stage == 1:
                for i in range(3):
                    tmp[i] = x[i] + 0.5 * dt * k1[i]
            elif stage == 2:
                for i in range(3):
                    tmp[i] = x[i] + 0.5 * dt * k2[i]
            else:
                for i in range(3):
                    tmp[i] = x[i] + dt * k3[i]
            z = tmp[2]
            vx = -z * tmp[0] * s
            vy = -z * tmp[1] * s
            vz = (1.0 - z * z) * s
            dot = kx * tmp[0] + ky * tmp[1] + kz * tmp[2]
            vx += kx - dot * tmp[0]
            vy += ky - dot * tmp[1]
            vz += kz - dot * tmp[2]
            if stage == 0:
                k1[0], k1[1], k1[2] = vx, vy, vz
            elif stage == 1:
                k2[0], k2[1], k2[2] = vx, vy, vz
            elif stage == 2:
                k3[0], k3[1], k3[2] = vx, vy, vz
            else:
                k4[0], k4[1], k4[2] = vx, vy, vz
        for i in range(3):
            x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        nrm = np.sqrt(x[0] ** 2 + x[1] ** 2 + x[2] ** 2)
        for i in range(3):
            x[i] = x[i] / nrm
            out[n + 1, i] = x[i]
    return out


def _rk4_linear_py(x0, weights, s, dt, nsteps, kicks):
    out = np.empty((nsteps + 1, x0.shape[0]), dtype=np.complex128)
    x = x0.astype(np.complex128).copy()
    out[0] = x
    w = weights.astype(np.float64)
    for n in range(nsteps):
        k = kicks[n]

        # field v(x) = -s*w*x + kick, linear so the stages are explicit
        k1 = -s * w * x + k
        k2 = -s * w * (x + 0.5 * dt * k1) + k
        k3 = -s * w * (x + 0.5 * dt * k2) + k
        k4 = -s * w * (x + dt * k3) + k
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[n + 1] = x
    return out


@njit(cache=True)
def _rk4_linear_nb(x0, weights, s, dt, nsteps, kicks):  # pragma: no cover
    m = x0.shape[0]
    out = np.empty((nsteps + 1, m), dtype=np.complex128)
    x = x0.copy()
    for j in range(m):
        out[0, j] = x[j]
    for n in range(nsteps):
        for j in range(m):
            wj = weights[j]
            kj = kicks[n, j]
            k1 = -s * wj * x[j] + kj
            k2 = -s * wj * (x[j] + 0.5 * dt * k1) + kj
            k3 = -s * wj * (x[j] + 0.5 * dt * k2) + kj
            k4 = -s * wj * (x[j] + dt * k3) + kj
            x[j] = x[j] + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[n + 1, j] = x[j]
    return out


def _hausdorff_directed_py(a, b):
    # max over a of min over b of euclidean distance
    worst = 0.0
    for i in range(a.shape[0]):
        d2 = np.min(np.sum((b - a[i]) ** 2, axis=1))
        if d2 > worst:
            worst = d2
    return np.sqrt(worst)


@njit(cache=True)
def _hausdorff_directed_nb(a, b):  # pragma: no cover - jitted
    worst = 0.0
    for i in range(a.shape[0]):
        best = 1e300
        for j in range(b.shape[0]):
            acc = 0.0
            for k in range(a.shape[1]):
                diff = a[i, k] - b[j, k]
                acc += diff * diff
            if acc < best:
                best = acc
        if best > worst:
            worst = best
    return np.sqrt(worst)


def rk4_sphere(x0, s, dt, nsteps, kicks=None):
    """Integrate x' = s*(e_z - z x) + tangent kicks on the unit sphere."""
    if kicks is None:
        kicks = np.zeros((nsteps, 3))
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    kicks = np.ascontiguousarray(kicks, dtype=np.float64)
    if USE_NUMBA:
        return _rk4_sphere_nb(x0, float(s), float(dt), int(nsteps), kicks)
    return _rk4_sphere_py(x0, float(s), float(dt), int(nsteps), kicks)


def rk4_linear(x0, weights, s, dt, nsteps, kicks=None):
    """Integrate x_j' = -s*w_j*x_j + kicks in flat coordinates."""
    if kicks is None:
        kicks = np.zeros((nsteps, len(x0)), dtype=np.complex128)
    x0 = np.ascontiguousarray(x0, dtype=np.complex128)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    kicks = np.ascontiguousarray(kicks, dtype=np.complex128)
    if USE_NUMBA:
        return _rk4_linear_nb(x0, weights, float(s), float(dt), int(nsteps), kicks)
    return _rk4_linear_py(x0, weights, float(s), float(dt), int(nsteps), kicks)


def hausdorff_directed(a, b):
    """sup over rows of `a` of the distance to the point set `b` (euclidean)."""
    a = np.ascontiguousarray(np.atleast_2d(a), dtype=np.float64)
    b = np.ascontiguousarray(np.atleast_2d(b), dtype=np.float64)
    if USE_NUMBA and a.shape[0] * b.shape[0] > 4096:
        return float(_hausdorff_directed_nb(a, b))
    return float(_hausdorff_directed_py(a, b))
