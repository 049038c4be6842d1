"""SE(3) kernel: hat/vee, exponential, adjoints and the exponential tangent map.

Twists and wrenches are flat 6-vectors laid out angular-first,
``[wx, wy, wz, vx, vy, vz]``.  Poses are 4x4 homogeneous matrices.

Every function accepts arbitrary leading batch dimensions and is written to be
holomorphic in its inputs (no ``abs``, no conjugating norms), so that
complex-step differentiation through the kinematics is exact.
"""

from __future__ import annotations

from math import factorial

import numpy as np

from .errors import NonSe3Matrix

# Below this value of (angle * arclength) the Rodrigues-type coefficients are
# evaluated from their Taylor series; the closed forms lose digits well above
# 1e-8 for the higher-order tangent coefficients.
SERIES_THRESHOLD = 0.2
_N_SERIES = 9


def _series(coeff):
    return np.array([coeff(n) for n in range(_N_SERIES)])


# Taylor coefficients in z = phi**2.
_SINC = _series(lambda n: (-1) ** n / factorial(2 * n + 1))
_COSC = _series(lambda n: (-1) ** n / factorial(2 * n + 2))
_SINC3 = _series(lambda n: (-1) ** n / factorial(2 * n + 3))
_T1 = _series(lambda n: 0.5 * (-1) ** n * (2 - 2 * n) / factorial(2 * n + 2))
_T2 = _series(lambda n: 0.5 * (-1) ** (n + 1) * (2 * n - 2) / factorial(2 * n + 3))
_T3 = _series(lambda n: 0.5 * (-1) ** n * (2 + 2 * n) / factorial(2 * n + 4))
_T4 = _series(lambda n: 0.5 * (-1) ** n * (2 * n + 2) / factorial(2 * n + 5))


def _poly(coeffs, z):
    out = np.zeros_like(z) + coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * z + c
    return out


def _coefficients(z, closed_forms, series):
    """Evaluate phi-even coefficient functions at z = phi**2.

    Uses the Taylor series where ``|phi| < SERIES_THRESHOLD`` and the closed
    forms elsewhere (guarding the closed forms against division by zero).
    """
    small = np.real(z) < SERIES_THRESHOLD**2
    z_safe = np.where(small, 1.0, z)
    phi = np.sqrt(z_safe)
    out = []
    for closed, coeffs in zip(closed_forms(phi), series):
        out.append(np.where(small, _poly(coeffs, z), closed))
    return out


def _dot3(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def skew(w):
    """3x3 antisymmetric matrix of a 3-vector (batched)."""
    w = np.asarray(w)
    out = np.zeros(w.shape[:-1] + (3, 3), dtype=w.dtype)
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def hat(v):
    """Map a twist to its 4x4 se(3) matrix."""
    v = np.asarray(v)
    out = np.zeros(v.shape[:-1] + (4, 4), dtype=v.dtype)
    out[..., :3, :3] = skew(v[..., :3])
    out[..., :3, 3] = v[..., 3:]
    return out


def vee(m, tol=1e-12):
    """Inverse of :func:`hat`; raises :class:`NonSe3Matrix` on malformed input."""
    m = np.asarray(m)
    if m.shape[-2:] != (4, 4):
        raise NonSe3Matrix(f"expected (...,4,4) matrix, got shape {m.shape}")
    w = m[..., :3, :3]
    if np.any(np.abs(w + np.swapaxes(w, -1, -2)) > tol) or np.any(np.abs(m[..., 3, :]) > tol):
        raise NonSe3Matrix("matrix is not in se(3): rotation block not antisymmetric or bottom row nonzero")
    out = np.empty(m.shape[:-2] + (6,), dtype=m.dtype)
    out[..., 0] = m[..., 2, 1]
    out[..., 1] = m[..., 0, 2]
    out[..., 2] = m[..., 1, 0]
    out[..., 3:] = m[..., :3, 3]
    return out


def exp_se3(v, arclen=1.0):
    """Closed-form exponential ``exp(hat(v) * arclen)``.

    ``arclen`` broadcasts against the batch shape of ``v``.
    """
    v = np.asarray(v)
    arclen = np.asarray(arclen)
    if np.any(np.real(arclen) < 0):
        raise ValueError("arclen must be non-negative")
    dtype = np.result_type(v, arclen, float)
    x = arclen[..., None]
    w = v[..., :3] * x
    lin = v[..., 3:] * x
    z = _dot3(w, w)

    def closed(phi):
        s, c = np.sin(phi), np.cos(phi)
        return s / phi, (1 - c) / phi**2, (phi - s) / phi**3

    a, b, c = _coefficients(z, closed, (_SINC, _COSC, _SINC3))
    W = skew(w)
    W2 = W @ W
    eye = np.eye(3)
    batch = np.broadcast_shapes(v.shape[:-1], arclen.shape)
    out = np.zeros(batch + (4, 4), dtype=dtype)
    out[..., :3, :3] = eye + a[..., None, None] * W + b[..., None, None] * W2
    V = eye + b[..., None, None] * W + c[..., None, None] * W2
    out[..., :3, 3] = np.einsum("...ij,...j->...i", V, lin)
    out[..., 3, 3] = 1.0
    return out


def inverse(g):
    """Inverse of a homogeneous transform in closed form."""
    g = np.asarray(g)
    out = np.zeros_like(g)
    Rt = np.swapaxes(g[..., :3, :3], -1, -2)
    out[..., :3, :3] = Rt
    out[..., :3, 3] = -np.einsum("...ij,...j->...i", Rt, g[..., :3, 3])
    out[..., 3, 3] = 1.0
    return out


def adjoint(g):
    """Ad_g = [[R, 0], [p^ R, R]] for the angular-first layout."""
    g = np.asarray(g)
    R = g[..., :3, :3]
    out = np.zeros(g.shape[:-2] + (6, 6), dtype=g.dtype)
    out[..., :3, :3] = R
    out[..., 3:, 3:] = R
    out[..., 3:, :3] = skew(g[..., :3, 3]) @ R
    return out


def adjoint_inv(g):
    """Ad_g^{-1} = Ad_{g^{-1}}, built from R^T and -R^T p."""
    return adjoint(inverse(g))


def ad(v):
    """Little adjoint [[w^, 0], [v^, w^]]."""
    v = np.asarray(v)
    out = np.zeros(v.shape[:-1] + (6, 6), dtype=v.dtype)
    W = skew(v[..., :3])
    out[..., :3, :3] = W
    out[..., 3:, 3:] = W
    out[..., 3:, :3] = skew(v[..., 3:])
    return out


def coad(v):
    """Coadjoint, fixed as the transpose of :func:`ad`."""
    return np.swapaxes(ad(v), -1, -2)


def exp_tangent(v, arclen=1.0):
    """T_v(l) = integral over s in [0, l] of Ad^{-1}_{exp(s v)}.

    This is the body-frame differential of the exponential: for
    ``h = exp_se3(v, l)``, ``h^{-1} dh = hat(T_v(l) dv)``.
    """
    v = np.asarray(v)
    arclen = np.asarray(arclen)
    if np.any(np.real(arclen) < 0):
        raise ValueError("arclen must be non-negative")
    x = arclen
    w = v[..., :3]
    z = _dot3(w, w) * x**2

    def closed(phi):
        s, c = np.sin(phi), np.cos(phi)
        return (
            (4 - 4 * c - phi * s) / (2 * phi**2),
            (4 * phi - 5 * s + phi * c) / (2 * phi**3),
            (2 - 2 * c - phi * s) / (2 * phi**4),
            (2 * phi - 3 * s + phi * c) / (2 * phi**5),
        )

    f1, f2, f3, f4 = _coefficients(z, closed, (_T1, _T2, _T3, _T4))
    A = ad(v)
    A2 = A @ A
    A3 = A2 @ A
    A4 = A3 @ A
    x_ = x[..., None, None]
    return (
        x_ * np.eye(6)
        - (x**2 * f1)[..., None, None] * A
        + (x**3 * f2)[..., None, None] * A2
        - (x**4 * f3)[..., None, None] * A3
        + (x**5 * f4)[..., None, None] * A4
    )


def log_se3(g):
    """Matrix logarithm of a single pose (test helper, not on the dynamics path)."""
    from scipy.linalg import logm

    return vee(np.real(logm(np.asarray(g, dtype=float))), tol=1e-8)


def is_pose(g, tol=1e-9):
    g = np.asarray(g)
    R = g[..., :3, :3]
    ortho = np.linalg.norm(np.swapaxes(R, -1, -2) @ R - np.eye(3), axis=(-2, -1))
    det = np.linalg.det(R)
    return bool(np.all(ortho < tol) and np.all(np.abs(det - 1) < tol))
