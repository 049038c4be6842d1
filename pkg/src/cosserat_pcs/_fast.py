"""Compiled PCS kernels used on the simulation hot path.

Scalar-loop versions of ``kinematics._chain`` and of the vector assembly in
``dynamics.rhs_terms`` (same closed forms and series as :mod:`.se3`).  Strains
are complex so that the complex-step Jacobian rate goes through unchanged.
Tests hold both kernels to the vectorized reference.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .se3 import _COSC, _SINC, _SINC3, _T1, _T2, _T3, _T4, SERIES_THRESHOLD

_SMALL = SERIES_THRESHOLD**2
_SERIES = np.stack([_SINC, _COSC, _SINC3, _T1, _T2, _T3, _T4])


@njit(cache=True)
def _poly(c, z):
    out = c[-1] + 0j
    for i in range(len(c) - 2, -1, -1):
        out = out * z + c[i]
    return out


@njit(cache=True)
def _skew(a, b, c, out):
    out[0, 0] = 0
    out[0, 1] = -c
    out[0, 2] = b
    out[1, 0] = c
    out[1, 1] = 0
    out[1, 2] = -a
    out[2, 0] = -b
    out[2, 1] = a
    out[2, 2] = 0


@njit(cache=True)
def _mm3(a, b, out):
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j]


@njit(cache=True)
def _compose(a, b, out):
    for i in range(4):
        for j in range(4):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j] + a[i, 3] * b[3, j]


@njit(cache=True)
def _point(xi, x, series, small, wk, g, Ai, T):
    """Fill g = exp(xi x), Ai = Ad_g^{-1} and T = T_xi(x) for one point.

    ``wk`` is a (6, 3, 3) complex scratch buffer.
    """
    W, W2, V, Wk, Pk, tmp = wk[0], wk[1], wk[2], wk[3], wk[4], wk[5]
    z = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) * x * x
    if z.real < small:
        a = _poly(series[0], z)
        b = _poly(series[1], z)
        c = _poly(series[2], z)
        f1 = _poly(series[3], z)
        f2 = _poly(series[4], z)
        f3 = _poly(series[5], z)
        f4 = _poly(series[6], z)
    else:
        phi = np.sqrt(z)
        s = np.sin(phi)
        co = np.cos(phi)
        p2 = phi * phi
        p3 = p2 * phi
        a = s / phi
        b = (1 - co) / p2
        c = (phi - s) / p3
        f1 = (4 - 4 * co - phi * s) / (2 * p2)
        f2 = (4 * phi - 5 * s + phi * co) / (2 * p3)
        f3 = (2 - 2 * co - phi * s) / (2 * p2 * p2)
        f4 = (2 * phi - 3 * s + phi * co) / (2 * p3 * p2)
    _skew(xi[0], xi[1], xi[2], W)
    _skew(xi[3], xi[4], xi[5], V)
    _mm3(W, W, W2)
    x2 = x * x
    for i in range(3):
        acc = 0j
        for j in range(3):
            e = 1.0 if i == j else 0.0
            g[i, j] = e + a * x * W[i, j] + b * x2 * W2[i, j]
            acc += (e + b * x * W[i, j] + c * x2 * W2[i, j]) * xi[3 + j] * x
        g[i, 3] = acc
        g[3, i] = 0
    g[3, 3] = 1.0
    # Ad^{-1} = [[R^T, 0], [-R^T p^, R^T]]
    for i in range(3):
        for j in range(3):
            Ai[i, j] = g[j, i]
            Ai[3 + i, 3 + j] = g[j, i]
            Ai[i, 3 + j] = 0
    _skew(g[0, 3], g[1, 3], g[2, 3], tmp)
    for i in range(3):
        for j in range(3):
            Ai[3 + i, j] = -(g[0, i] * tmp[0, j] + g[1, i] * tmp[1, j] + g[2, i] * tmp[2, j])
    # T = x I + sum_k c_k ad(xi)^k with ad^k = [[W^k, 0], [P_k, W^k]],
    # P_1 = V and P_{k+1} = P_k W + W^k V
    coef = (-x2 * f1, x2 * x * f2, -x2 * x2 * f3, x2 * x2 * x * f4)
    for i in range(3):
        for j in range(3):
            Wk[i, j] = W[i, j]
            Pk[i, j] = V[i, j]
            e = x if i == j else 0.0
            T[i, j] = e + coef[0] * W[i, j]
            T[3 + i, 3 + j] = T[i, j]
            T[3 + i, j] = coef[0] * V[i, j]
            T[i, 3 + j] = 0
    for k in range(1, 4):
        # tmp = P_k W + W^k V, then advance W^k
        for i in range(3):
            for j in range(3):
                tmp[i, j] = (
                    Pk[i, 0] * W[0, j] + Pk[i, 1] * W[1, j] + Pk[i, 2] * W[2, j]
                    + Wk[i, 0] * V[0, j] + Wk[i, 1] * V[1, j] + Wk[i, 2] * V[2, j]
                )
        Pk[:, :] = tmp
        _mm3(Wk, W, tmp)
        Wk[:, :] = tmp
        ck = coef[k]
        for i in range(3):
            for j in range(3):
                T[i, j] += ck * Wk[i, j]
                T[3 + i, 3 + j] += ck * Wk[i, j]
                T[3 + i, j] += ck * Pk[i, j]


@njit(cache=True)
def _section_starts(xi, lengths, series, small, wk, h, Ai, T):
    n = xi.shape[0]
    g_start = np.zeros((n, 4, 4), dtype=np.complex128)
    J_start = np.zeros((n, 6, 6 * n), dtype=np.complex128)
    for i in range(4):
        g_start[0, i, i] = 1.0
    for s in range(n - 1):
        _point(xi[s], lengths[s], series, small, wk, h, Ai, T)
        _compose(g_start[s], h, g_start[s + 1])
        for i in range(6):
            for j in range(6 * s):
                acc = 0j
                for p in range(6):
                    acc += Ai[i, p] * J_start[s, p, j]
                J_start[s + 1, i, j] = acc
            for j in range(6):
                J_start[s + 1, i, 6 * s + j] = T[i, j]
    return g_start, J_start


@njit(cache=True)
def _point_jacobian(J_start, s, Ai, T, J):
    """J = Ad^{-1} J(X_{s-1}) on the upstream blocks, T on block s, zero downstream."""
    dof = J.shape[1]
    for i in range(6):
        for j in range(6 * s):
            acc = 0j
            for p in range(6):
                acc += Ai[i, p] * J_start[s, p, j]
            J[i, j] = acc
        for j in range(6):
            J[i, 6 * s + j] = T[i, j]
        for j in range(6 * s + 6, dof):
            J[i, j] = 0


@njit(cache=True)
def chain(xi, lengths, sec, x, series, small):
    """Base-relative poses and body Jacobians at points (sec[k], x[k]).

    ``xi`` is (N, 6) complex; returns g (m, 4, 4) and J (m, 6, 6N).
    """
    n = xi.shape[0]
    m = len(x)
    wk = np.zeros((6, 3, 3), dtype=np.complex128)
    h = np.zeros((4, 4), dtype=np.complex128)
    Ai = np.zeros((6, 6), dtype=np.complex128)
    T = np.zeros((6, 6), dtype=np.complex128)
    g_start, J_start = _section_starts(xi, lengths, series, small, wk, h, Ai, T)
    g_out = np.zeros((m, 4, 4), dtype=np.complex128)
    J_out = np.zeros((m, 6, 6 * n), dtype=np.complex128)
    for k in range(m):
        s = sec[k]
        _point(xi[s], x[k], series, small, wk, h, Ai, T)
        _compose(g_start[s], h, g_out[k])
        _point_jacobian(J_start, s, Ai, T, J_out[k])
    return g_out, J_out


@njit(cache=True)
def rhs_kernel(xi, qd, lengths, sec, x, w, m_a, mm, drag, buoy, G, hstep, series, small):
    """Vector assembly for one forward-dynamics evaluation.

    ``xi`` is q + i*hstep*qd reshaped (N, 6); the last point of (sec, x) is the
    actuation point.  Returns M, bias = (C1 + C2 + D) qd, the gravity term, the
    drag power, and the real pose and Jacobian at the actuation point.
    """
    n = xi.shape[0]
    dof = 6 * n
    m = len(x) - 1
    wk = np.zeros((6, 3, 3), dtype=np.complex128)
    h = np.zeros((4, 4), dtype=np.complex128)
    Ai = np.zeros((6, 6), dtype=np.complex128)
    T = np.zeros((6, 6), dtype=np.complex128)
    g_start, J_start = _section_starts(xi, lengths, series, small, wk, h, Ai, T)
    J = np.zeros((6, dof), dtype=np.complex128)
    g = np.zeros((4, 4), dtype=np.complex128)
    B = np.zeros((6 * m, dof))
    bias = np.zeros(dof)
    grav = np.zeros(dof)
    eta = np.zeros(6)
    acc = np.zeros(6)
    f = np.zeros(6)
    fg = np.zeros(6)
    drag_power = 0.0
    for k in range(m + 1):
        s = sec[k]
        ncol = 6 * s + 6
        _point(xi[s], x[k], series, small, wk, h, Ai, T)
        _point_jacobian(J_start, s, Ai, T, J)
        if k == m:
            break
        for i in range(6):
            e = 0.0
            a = 0.0
            for j in range(ncol):
                e += J[i, j].real * qd[j]
                a += J[i, j].imag * qd[j]
            eta[i] = e
            acc[i] = a / hstep
        ma = m_a[k]
        pa0, pa1, pa2 = ma[0] * eta[0], ma[1] * eta[1], ma[2] * eta[2]
        pl0, pl1, pl2 = ma[3] * eta[3], ma[4] * eta[4], ma[5] * eta[5]
        w0, w1, w2 = eta[0], eta[1], eta[2]
        v0, v1, v2 = eta[3], eta[4], eta[5]
        # -ad(eta)^T (M_a eta) = [w x pa + v x pl ; w x pl]
        f[0] = ma[0] * acc[0] + (w1 * pa2 - w2 * pa1) + (v1 * pl2 - v2 * pl1)
        f[1] = ma[1] * acc[1] + (w2 * pa0 - w0 * pa2) + (v2 * pl0 - v0 * pl2)
        f[2] = ma[2] * acc[2] + (w0 * pa1 - w1 * pa0) + (v0 * pl1 - v1 * pl0)
        f[3] = ma[3] * acc[3] + (w1 * pl2 - w2 * pl1)
        f[4] = ma[4] * acc[4] + (w2 * pl0 - w0 * pl2)
        f[5] = ma[5] * acc[5] + (w0 * pl1 - w1 * pl0)
        speed = np.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
        dk = drag[k]
        for i in range(6):
            fd = dk[i] * eta[i] * speed
            f[i] += fd
            drag_power += w[k] * eta[i] * fd
        # gravity twist in the node frame: Ad_g^{-1} G with g = g_start[s] h
        _compose(g_start[s], h, g)
        R = g[:3, :3].real
        p = g[:3, 3].real
        c0 = G[3] - (p[1] * G[2] - p[2] * G[1])
        c1 = G[4] - (p[2] * G[0] - p[0] * G[2])
        c2 = G[5] - (p[0] * G[1] - p[1] * G[0])
        for i in range(3):
            fg[i] = buoy * mm[k, i] * (R[0, i] * G[0] + R[1, i] * G[1] + R[2, i] * G[2])
            fg[3 + i] = buoy * mm[k, 3 + i] * (R[0, i] * c0 + R[1, i] * c1 + R[2, i] * c2)
        wkk = w[k]
        for j in range(ncol):
            sb = 0.0
            sg = 0.0
            for i in range(6):
                Jr = J[i, j].real
                sb += Jr * f[i]
                sg += Jr * fg[i]
            bias[j] += wkk * sb
            grav[j] += wkk * sg
        for i in range(6):
            sc = np.sqrt(wkk * ma[i])
            for j in range(ncol):
                B[6 * k + i, j] = sc * J[i, j].real
    M = B.T @ B
    _compose(g_start[sec[m]], h, g)
    return M, bias, grav, drag_power, g.real.copy(), J.real.copy()


def chain_complex(xi, lengths, sec, x):
    return chain(np.ascontiguousarray(xi, dtype=np.complex128), lengths, sec, x, _SERIES, _SMALL)


def rhs_compiled(xi, qd, lengths, sec, x, w, m_a, mm, drag, buoy, G, hstep):
    return rhs_kernel(
        np.ascontiguousarray(xi, dtype=np.complex128), qd, lengths, sec, x, w, m_a, mm, drag, buoy, G, hstep,
        _SERIES, _SMALL,
    )
