"""Generalized PCS dynamics assembled by midpoint quadrature over the microsolids.

Equation of motion, with every load moved to the right-hand side::

    M(q) qdd + [C1 + C2 + D] qd = u + tau_int + F(q) + N(q) Ad_{g_r}^{-1} G

Sign and frame conventions:

* ``coad(v) = ad(v)^T``; the gyroscopic force per node is ``-coad(eta) M_a eta``.
* ``C1`` adds ``M_a ad(eta)`` to the gyroscopic term.  That extra piece
  annihilates ``qd`` (``ad(eta) eta = 0``) so the motion is unchanged, and it
  makes ``C1`` skew, which gives ``Mdot - 2 (C1 + C2)`` exact skew-symmetry.
* Poses entering the gravity map are relative to the base, so that
  ``N(q) Ad_{g_r}^{-1} G`` applies the base transform exactly once.
* Tip loads are given in the base frame (a dead load) unless ``frame="body"``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import se3
from .errors import DimensionMismatch, SingularMass
from .kinematics import _COMPLEX_STEP, NodeKinematics, compile_rod, fast_points, node_kinematics
from .rod import XI0


@dataclass(frozen=True)
class GeneralizedTerms:
    M: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D: np.ndarray
    N_grav: np.ndarray  # (6N, 6) gravity/buoyancy map
    grav: np.ndarray  # N_grav @ Ad_{g_r}^{-1} G
    F_tip: np.ndarray
    tau_int: np.ndarray


def _qvec(model, v, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (model.dof,):
        raise DimensionMismatch(f"{name} has shape {v.shape}, expected ({model.dof},)")
    return v


def _kin(model, q, qdot=None):
    q = _qvec(model, q, "q")
    if qdot is not None:
        qdot = _qvec(model, qdot, "qdot")
    return node_kinematics(model, q, qdot)


def _weighted(model, J):
    return J * model.weights[:, None, None]


def mass_matrix(rod, q, kin: NodeKinematics | None = None) -> np.ndarray:
    model = compile_rod(rod)
    kin = kin or _kin(model, q)
    J = kin.J
    return np.einsum("kia,kib->ab", _weighted(model, J), model.m_a[:, :, None] * J)


def _c1_kernel(model, eta):
    A = se3.ad(eta)
    Ma = model.m_a[:, :, None]
    return Ma * A - np.swapaxes(A, -1, -2) * model.m_a[:, None, :]


def coriolis1(rod, q, qdot, kin: NodeKinematics | None = None) -> np.ndarray:
    model = compile_rod(rod)
    kin = kin or _kin(model, q, qdot)
    X = _c1_kernel(model, kin.eta)
    return np.einsum("kia,kij,kjb->ab", _weighted(model, kin.J), X, kin.J, optimize=True)


def coriolis2(rod, q, qdot, kin: NodeKinematics | None = None) -> np.ndarray:
    model = compile_rod(rod)
    kin = kin or _kin(model, q, qdot)
    return np.einsum("kia,kib->ab", _weighted(model, kin.J), model.m_a[:, :, None] * kin.Jdot)


def _lin_speed(eta):
    # norm of the translational part, written holomorphically
    return np.sqrt(np.sum(eta[:, 3:] ** 2, axis=1))


def drag_matrix(rod, q, qdot, kin: NodeKinematics | None = None) -> np.ndarray:
    model = compile_rod(rod)
    if not np.any(model.drag):
        return np.zeros((model.dof, model.dof))
    kin = kin or _kin(model, q, qdot)
    scale = model.weights * _lin_speed(kin.eta)
    J = kin.J
    return np.einsum("kia,kib->ab", J * scale[:, None, None], model.drag[:, :, None] * J)


def _gravity_twist_body(model, g_nodes):
    """Ad_g^{-1} Ad_{g_r}^{-1} G at each node (zero angular part for pure gravity)."""
    G_base = se3.adjoint_inv(model.g_r) @ model.rod.gravity
    return se3.adjoint_inv(g_nodes) @ G_base


def gravity_map(rod, q, kin: NodeKinematics | None = None) -> np.ndarray:
    """N(q) = (1 - rho_f/rho) * sum_k w_k J^T M Ad_{g(X_k)}^{-1}, shape (6N, 6)."""
    model = compile_rod(rod)
    kin = kin or _kin(model, q)
    Ai = se3.adjoint_inv(kin.g)
    MJ = model.m[:, :, None] * Ai
    return model.rod.buoyancy_factor * np.einsum("kia,kij->aj", _weighted(model, kin.J), MJ)


def gravity_buoyancy(rod, q, kin: NodeKinematics | None = None) -> np.ndarray:
    model = compile_rod(rod)
    kin = kin or _kin(model, q)
    gamma = _gravity_twist_body(model, kin.g)
    f = model.rod.buoyancy_factor * model.m * gamma
    return np.einsum("kia,ki->a", _weighted(model, kin.J), f)


def body_wrench(g_bar, wrench, frame="base"):
    """Express a load applied at the actuation point in that point's body frame."""
    wrench = np.asarray(wrench, dtype=float)
    if frame == "body":
        return wrench
    if frame != "base":
        raise ValueError(f"unknown wrench frame {frame!r}")
    Rt = g_bar[:3, :3].T
    return np.concatenate([Rt @ wrench[:3], Rt @ wrench[3:]])


def tip_force(rod, q, wrench, frame="base", kin: NodeKinematics | None = None) -> np.ndarray:
    """J(X_bar)^T F_p, with J evaluated exactly at the actuation point."""
    model = compile_rod(rod)
    wrench = np.asarray(wrench, dtype=float)
    if not np.any(wrench):
        return np.zeros(model.dof)
    kin = kin or _kin(model, q)
    return kin.J_bar.T @ body_wrench(kin.g_bar, wrench, frame)


def internal_force(rod, q, qdot, parts=False):
    """Kelvin-Voigt generalized force, -l_i [Sigma (xi_i - xi_0) + Upsilon xi_dot_i]."""
    model = compile_rod(rod)
    xi = _qvec(model, q, "q").reshape(model.n, 6)
    xid = _qvec(model, qdot, "qdot").reshape(model.n, 6)
    ell = model.lengths[:, None]
    elastic = -(ell * model.stiffness_sec * (xi - XI0)).ravel()
    viscous = -(ell * model.viscosity_sec * xid).ravel()
    if parts:
        return elastic, viscous
    return elastic + viscous


def elastic_energy(rod, q) -> float:
    model = compile_rod(rod)
    d = _qvec(model, q, "q").reshape(model.n, 6) - XI0
    return 0.5 * float(np.sum(model.lengths[:, None] * model.stiffness_sec * d * d))


def gravity_energy(rod, q, kin: NodeKinematics | None = None) -> float:
    """Potential whose negative gradient is gravity_buoyancy."""
    model = compile_rod(rod)
    kin = kin or _kin(model, q)
    g_base = model.g_r[:3, :3].T @ model.rod.gravity[3:]
    mass = model.rod.buoyancy_factor * model.m[:, 3] * model.weights
    return -float(np.sum(mass * (kin.g[:, :3, 3] @ g_base)))


def tip_energy(rod, q, force_base, kin: NodeKinematics | None = None) -> float:
    """Potential of a constant base-frame force at the actuation point."""
    model = compile_rod(rod)
    kin = kin or _kin(model, q)
    return -float(np.asarray(force_base, dtype=float) @ kin.g_bar[:3, 3])


def assemble(rod, q, qdot, wrench=None, frame="base") -> GeneralizedTerms:
    """Every generalized term at (q, qdot) from a single kinematic pass."""
    model = compile_rod(rod)
    kin = _kin(model, q, qdot)
    N = gravity_map(model, q, kin)
    G_base = se3.adjoint_inv(model.g_r) @ model.rod.gravity
    F = np.zeros(model.dof) if wrench is None else tip_force(model, q, wrench, frame, kin)
    return GeneralizedTerms(
        M=mass_matrix(model, q, kin),
        C1=coriolis1(model, q, qdot, kin),
        C2=coriolis2(model, q, qdot, kin),
        D=drag_matrix(model, q, qdot, kin),
        N_grav=N,
        grav=N @ G_base,
        F_tip=F,
        tau_int=internal_force(model, q, qdot),
    )


@dataclass(frozen=True)
class RhsTerms:
    """Vector terms needed for one forward-dynamics solve."""

    M: np.ndarray
    bias: np.ndarray  # (C1 + C2 + D) qdot
    grav: np.ndarray
    F_tip: np.ndarray
    tau_int: np.ndarray
    drag_power: float  # qdot^T D qdot


def _rhs_compiled(model, q, qdot, wrench, frame) -> RhsTerms:
    from . import _fast

    if not hasattr(model, "_fast_args"):
        sec, x = fast_points(model)
        G_base = se3.adjoint_inv(model.g_r) @ model.rod.gravity
        c = np.ascontiguousarray
        model._fast_args = (
            c(model.lengths), sec, x, c(model.weights), c(model.m_a), c(model.m), c(model.drag),
            float(model.rod.buoyancy_factor), c(G_base, dtype=float),
        )
    lengths, sec, x, w, m_a, m, drag, buoy, G = model._fast_args
    xi = (q + 1j * _COMPLEX_STEP * qdot).reshape(model.n, 6)
    M, bias, grav, drag_power, g_bar, J_bar = _fast.rhs_compiled(
        xi, qdot, lengths, sec, x, w, m_a, m, drag, buoy, G, _COMPLEX_STEP
    )
    F = np.zeros(model.dof)
    if wrench is not None and np.any(wrench):
        F = J_bar.T @ body_wrench(g_bar, wrench, frame)
    return RhsTerms(M, bias, grav, F, internal_force(model, q, qdot), drag_power)


def rhs_terms(rod, q, qdot, wrench=None, frame="base", compiled=True) -> RhsTerms:
    """Vector terms of the equation of motion.

    ``compiled=False`` runs the vectorized numpy reference instead of the
    compiled kernel; both agree to rounding.
    """
    model = compile_rod(rod)
    q = _qvec(model, q, "q")
    qdot = _qvec(model, qdot, "qdot")
    if compiled:
        return _rhs_compiled(model, q, qdot, wrench, frame)
    kin = node_kinematics(model, q, qdot)
    J, eta, wJ = kin.J, kin.eta, _weighted(model, kin.J)
    MJ = model.m_a[:, :, None] * J
    M = np.einsum("kia,kib->ab", wJ, MJ)
    Jd_qd = kin.Jdot @ qdot
    node_force = model.m_a * Jd_qd - np.einsum("kji,kj->ki", se3.ad(eta), model.m_a * eta)
    drag_f = model.drag * eta * _lin_speed(eta)[:, None]
    node_force = node_force + drag_f
    bias = np.einsum("kia,ki->a", wJ, node_force)
    gamma = _gravity_twist_body(model, kin.g)
    grav = np.einsum("kia,ki->a", wJ, model.rod.buoyancy_factor * model.m * gamma)
    F = np.zeros(model.dof)
    if wrench is not None and np.any(wrench):
        F = kin.J_bar.T @ body_wrench(kin.g_bar, wrench, frame)
    drag_power = float(np.sum(model.weights * np.einsum("ki,ki->k", eta, drag_f)))
    return RhsTerms(M, bias, grav, F, internal_force(model, q, qdot), drag_power)


def solve_mass(M, rhs):
    try:
        return cho_solve(cho_factor(M), rhs)
    except LinAlgError as exc:
        raise SingularMass(f"generalized inertia is not positive definite: {exc}") from exc


def forward_dynamics(rod, q, qdot, u, wrench=None, frame="base", compiled=True) -> np.ndarray:
    """qdd from M qdd = u + tau_int + F + N Ad^{-1} G - (C1 + C2 + D) qdot."""
    model = compile_rod(rod)
    u = _qvec(model, u, "u")
    t = rhs_terms(model, q, qdot, wrench, frame, compiled)
    return solve_mass(t.M, u + t.tau_int + t.F_tip + t.grav - t.bias)


# Per-section parameter blocks, in order, each the diagonal of a 6x6 tensor.
PARAMETER_BLOCKS = ("total_inertia", "weighted_inertia", "drag", "stiffness", "viscosity")


def parameter_vector(rod, wrench=None) -> np.ndarray:
    """Theta: per section the diagonals of M_a, (1 - rho_f/rho) M, drag, Sigma and
    Upsilon (30 entries), followed by the tip wrench (6 entries)."""
    model = compile_rod(rod)
    blocks = [
        model.inertia_sec + model.added_sec,
        model.rod.buoyancy_factor * model.inertia_sec,
        model.drag_sec,
        model.stiffness_sec,
        model.viscosity_sec,
    ]
    theta = np.concatenate([np.concatenate([b[s] for b in blocks]) for s in range(model.n)])
    w = np.zeros(6) if wrench is None else np.asarray(wrench, dtype=float)
    return np.concatenate([theta, w])


def regressor(rod, q, qdot, qddot, frame="base", wrench=None):
    """Y(q, qd, qdd) and Theta with Y @ Theta = M qdd + (C1 + C2 + D) qd - F - N Ad^{-1} G - tau_int.

    Y depends only on the state; Theta only on the rod parameters and the tip
    wrench (pass ``wrench`` to get the matching Theta).
    """
    model = compile_rod(rod)
    q = _qvec(model, q, "q")
    qdot = _qvec(model, qdot, "qdot")
    qddot = _qvec(model, qddot, "qddot")
    kin = node_kinematics(model, q, qdot)
    n, dof = model.n, model.dof
    wJ = _weighted(model, kin.J)
    eta = kin.eta
    acc = kin.J @ qddot + kin.Jdot @ qdot
    adT = np.swapaxes(se3.ad(eta), -1, -2)
    # column i of the per-node inertial force for unit M_a[i]
    eye = np.eye(6)
    inert = eye[None] * acc[:, None, :] - adT * eta[:, None, :]  # (k, row, i)
    drag = eye[None] * (eta * _lin_speed(eta)[:, None])[:, None, :]
    gamma = _gravity_twist_body(model, kin.g)
    grav = -eye[None] * gamma[:, None, :]
    Y = np.zeros((dof, 30 * n + 6))
    sec = model.grid.section
    for s in range(n):
        k = sec == s
        col = 30 * s
        Y[:, col : col + 6] = np.einsum("kia,kij->aj", wJ[k], inert[k])
        Y[:, col + 6 : col + 12] = np.einsum("kia,kij->aj", wJ[k], grav[k])
        Y[:, col + 12 : col + 18] = np.einsum("kia,kij->aj", wJ[k], drag[k])
        rows = slice(6 * s, 6 * s + 6)
        Y[rows, col + 18 : col + 24] = np.diag(model.lengths[s] * (q[rows] - XI0))
        Y[rows, col + 24 : col + 30] = np.diag(model.lengths[s] * qdot[rows])
    # tip wrench enters as -J(X_bar)^T W_body, W_body linear in the wrench
    if frame == "body":
        P = np.eye(6)
    else:
        Rt = kin.g_bar[:3, :3].T
        P = np.zeros((6, 6))
        P[:3, :3] = Rt
        P[3:, 3:] = Rt
    Y[:, 30 * n :] = -kin.J_bar.T @ P
    return Y, parameter_vector(model, wrench)
