"""Strain-space feedback laws and Lyapunov instrumentation.

All four laws share the form

    u = -K_p e - K_D (qd - qd_ref) - K_I z - [F(q)] - [N(q) Ad_{g_r}^{-1} G]

with ``e = q - q_ref(t)`` and ``z`` the integral of ``e``.  A position setpoint
has ``q_ref = q_d`` and ``qd_ref = 0``.  A velocity setpoint regulates the strain
rate through the ramp ``q_ref(t) = q_start + qd_d t``.

The plant keeps its Kelvin-Voigt internal force, so the Lyapunov function adds
the potential of every conservative load the law leaves in place (elastic
always, gravity and the tip force when not cancelled).  With that term the rate
along a matched closed loop is ``-qd^T (K_D + D + l Upsilon) qd``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import dynamics
from .errors import DimensionMismatch, ModeMismatch
from .kinematics import compile_rod


class ControllerKind(str, Enum):
    PD_CABLE = "pd_cable"
    PD_FLUID = "pd_fluid"
    PD_GRAV = "pd_grav"
    PID_GRAV = "pid_grav"

    @property
    def cancels_tip_load(self) -> bool:
        return self is not ControllerKind.PD_FLUID

    @property
    def cancels_gravity(self) -> bool:
        return self in (ControllerKind.PD_GRAV, ControllerKind.PID_GRAV)

    @property
    def integral(self) -> bool:
        return self is ControllerKind.PID_GRAV


def gain_matrix(value, n_sections: int) -> np.ndarray:
    """Expand a gain spec into a 6N x 6N matrix.

    Accepts a scalar, one 6-diagonal shared by every section, one scalar per
    section (length N), a full diagonal (length 6N), per-section diagonals
    (N x 6) or a 6N x 6N matrix.  A length-6 vector always means the shared
    6-diagonal, also when N = 6.
    """
    dof = 6 * n_sections
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(dof)
    if a.shape == (dof, dof):
        return a.copy()
    if a.ndim == 1 and a.size == 6:
        return np.diag(np.tile(a, n_sections))
    if a.ndim == 1 and a.size == n_sections:
        return np.diag(np.repeat(a, 6))
    if a.size == dof and a.ndim in (1, 2) and (a.ndim == 1 or a.shape == (n_sections, 6)):
        return np.diag(a.ravel())
    raise DimensionMismatch(f"cannot expand gain of shape {a.shape} for {n_sections} sections")


def _is_pd(K, strict):
    if not np.allclose(K, K.T, rtol=0, atol=1e-12 * max(1.0, np.abs(K).max())):
        return False
    lam = np.linalg.eigvalsh(K)
    return bool(lam.min() > 0) if strict else bool(lam.min() >= -1e-12 * max(1.0, lam.max()))


@dataclass(frozen=True)
class Gains:
    K_p: np.ndarray
    K_D: np.ndarray
    K_I: np.ndarray | None = None
    integral_bound: float = np.inf

    def __post_init__(self):
        K_p = np.asarray(self.K_p, dtype=float)
        K_D = np.asarray(self.K_D, dtype=float)
        K_I = np.zeros_like(K_p) if self.K_I is None else np.asarray(self.K_I, dtype=float)
        if not (K_p.shape == K_D.shape == K_I.shape) or K_p.ndim != 2 or K_p.shape[0] != K_p.shape[1]:
            raise DimensionMismatch("K_p, K_D and K_I must be square matrices of one size")
        if not _is_pd(K_p, True):
            raise ValueError("K_p must be symmetric positive definite")
        if not _is_pd(K_D, True):
            raise ValueError("K_D must be symmetric positive definite")
        if not _is_pd(K_I, False):
            raise ValueError("K_I must be symmetric positive semidefinite")
        if not self.integral_bound > 0:
            raise ValueError("integral_bound must be positive")
        object.__setattr__(self, "K_p", K_p)
        object.__setattr__(self, "K_D", K_D)
        object.__setattr__(self, "K_I", K_I)

    @classmethod
    def build(cls, n_sections, K_p, K_D, K_I=0.0, integral_bound=np.inf) -> "Gains":
        return cls(
            gain_matrix(K_p, n_sections),
            gain_matrix(K_D, n_sections),
            gain_matrix(K_I, n_sections),
            integral_bound,
        )

    @property
    def dof(self) -> int:
        return self.K_p.shape[0]

    def scaled(self, kp=1.0, kd=1.0, ki=1.0) -> "Gains":
        return Gains(kp * self.K_p, kd * self.K_D, ki * self.K_I, self.integral_bound)


class Reference(NamedTuple):
    """Resolved reference at one instant."""

    q: np.ndarray
    qdot: np.ndarray


@dataclass(frozen=True)
class Setpoint:
    """Position setpoint (``q_d``) or velocity setpoint (``qdot_d`` ramped from ``q_start``)."""

    mode: str
    q_d: np.ndarray | None = None
    qdot_d: np.ndarray | None = None
    q_start: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.mode not in ("position", "velocity"):
            raise ValueError(f"unknown setpoint mode {self.mode!r}")
        for name in ("q_d", "qdot_d", "q_start"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float).copy())
        if self.mode == "position" and self.q_d is None:
            raise ValueError("position setpoint needs q_d")
        if self.mode == "velocity" and self.qdot_d is None:
            raise ValueError("velocity setpoint needs qdot_d")

    @classmethod
    def position(cls, q_d) -> "Setpoint":
        return cls("position", q_d=q_d)

    @classmethod
    def velocity(cls, qdot_d, q_start=None) -> "Setpoint":
        return cls("velocity", qdot_d=qdot_d, q_start=q_start)

    @property
    def dof(self) -> int:
        return (self.q_d if self.mode == "position" else self.qdot_d).size

    def started(self, q0) -> "Setpoint":
        """Anchor a velocity ramp at the initial configuration."""
        if self.mode == "position":
            return self
        return Setpoint("velocity", qdot_d=self.qdot_d, q_start=np.asarray(q0, dtype=float))

    def at(self, t: float) -> Reference:
        if self.mode == "position":
            return Reference(self.q_d, np.zeros_like(self.q_d))
        if self.q_start is None:
            raise ModeMismatch("velocity setpoint has no ramp origin; call started(q0) first")
        return Reference(self.q_start + self.qdot_d * t, self.qdot_d)

    @property
    def anchor(self) -> np.ndarray:
        """Reference configuration at t = 0."""
        return self.at(0.0).q


def _reference(setpoint, dof) -> Reference:
    if isinstance(setpoint, Setpoint):
        if setpoint.mode != "position":
            raise ModeMismatch("feedback laws take a position setpoint or a resolved Reference")
        setpoint = setpoint.at(0.0)
    ref = Reference(np.asarray(setpoint.q, dtype=float), np.asarray(setpoint.qdot, dtype=float))
    if ref.q.shape != (dof,) or ref.qdot.shape != (dof,):
        raise DimensionMismatch(f"setpoint has {ref.q.size} coordinates, gains have {dof}")
    return ref


def _pd(gains: Gains, q, qdot, setpoint):
    ref = _reference(setpoint, gains.dof)
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    if q.shape != (gains.dof,) or qdot.shape != (gains.dof,):
        raise DimensionMismatch(f"state has shape {q.shape}/{qdot.shape}, gains have {gains.dof}")
    return -gains.K_p @ (q - ref.q) - gains.K_D @ (qdot - ref.qdot)


def control_pd_cable(gains, q, qdot, setpoint, F_tip_vec):
    """u = -K_p e - K_D e_dot - F(q)."""
    return _pd(gains, q, qdot, setpoint) - np.asarray(F_tip_vec, dtype=float)


def control_pd_fluid(gains, q, qdot, setpoint):
    """u = -K_p e - K_D e_dot; no tip-load term in the law."""
    return _pd(gains, q, qdot, setpoint)


def control_pd_grav(gains, q, qdot, setpoint, F_tip_vec, grav_vec):
    """u = -K_p e - K_D e_dot - F(q) - N(q) Ad^{-1} G."""
    return control_pd_cable(gains, q, qdot, setpoint, F_tip_vec) - np.asarray(grav_vec, dtype=float)


def clamp_integral(gains: Gains, z):
    b = gains.integral_bound
    return np.asarray(z, dtype=float) if np.isinf(b) else np.clip(z, -b, b)


def control_pid_grav(gains, q, qdot, setpoint, F_tip_vec, grav_vec, error_integral):
    """Gravity-compensated PD plus -K_I z, z being the (clamped) integral of e."""
    z = clamp_integral(gains, error_integral)
    return control_pd_grav(gains, q, qdot, setpoint, F_tip_vec, grav_vec) - gains.K_I @ z


def control_law(kind: ControllerKind, gains, q, qdot, ref, F_tip_vec, grav_vec, error_integral=None):
    kind = ControllerKind(kind)
    if kind is ControllerKind.PD_CABLE:
        return control_pd_cable(gains, q, qdot, ref, F_tip_vec)
    if kind is ControllerKind.PD_FLUID:
        return control_pd_fluid(gains, q, qdot, ref)
    if kind is ControllerKind.PD_GRAV:
        return control_pd_grav(gains, q, qdot, ref, F_tip_vec, grav_vec)
    z = np.zeros(gains.dof) if error_integral is None else error_integral
    return control_pid_grav(gains, q, qdot, ref, F_tip_vec, grav_vec, z)


def integral_rate(gains: Gains, e, z):
    """dz/dt = e, frozen on any component already at the clamp and pushing outward."""
    e = np.asarray(e, dtype=float)
    b = gains.integral_bound
    if np.isinf(b):
        return e
    z = np.asarray(z, dtype=float)
    stuck = ((z >= b) & (e > 0)) | ((z <= -b) & (e < 0))
    return np.where(stuck, 0.0, e)


def uncancelled_potential(rod, kind, q, tip_force=None, kin=None) -> float:
    """Potential of the conservative plant loads the law does not cancel."""
    kind = ControllerKind(kind)
    P = dynamics.elastic_energy(rod, q)
    if not kind.cancels_gravity:
        P += dynamics.gravity_energy(rod, q, kin)
    if not kind.cancels_tip_load and tip_force is not None and np.any(tip_force):
        P += dynamics.tip_energy(rod, q, tip_force, kin)
    return P


def _uncancelled_force(terms, kind, elastic):
    f = elastic.copy()
    if not kind.cancels_gravity:
        f = f + terms.grav
    if not kind.cancels_tip_load:
        f = f + terms.F_tip
    return f


def lyapunov_value(
    rod, gains, q, qdot, setpoint, error_integral=None, *, kind=ControllerKind.PD_GRAV, t=0.0,
    tip_force=None, integral_energy=0.0, bare=False,
):
    """V = 1/2 qd^T M qd + 1/2 e^T K_p e + P(q) - P(q_anchor) [+ 1/2 s].

    ``P`` is :func:`uncancelled_potential`, ``s`` the running integral of
    ``e^T K_I e`` (only for the integral law).  ``bare=True`` drops the
    potential shift and returns the textbook candidate.
    """
    kind = ControllerKind(kind)
    ref = setpoint.at(t) if isinstance(setpoint, Setpoint) else Reference(*setpoint)
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    e = q - ref.q
    V = 0.5 * qdot @ dynamics.mass_matrix(rod, q) @ qdot + 0.5 * e @ gains.K_p @ e
    if kind.integral:
        V += 0.5 * float(integral_energy)
    if bare:
        return float(V)
    anchor = setpoint.anchor if isinstance(setpoint, Setpoint) else ref.q
    V += uncancelled_potential(rod, kind, q, tip_force) - uncancelled_potential(rod, kind, anchor, tip_force)
    return float(V)


def lyapunov_rate(
    rod, gains, q, qdot, u_applied, setpoint, error_integral=None, *, kind=ControllerKind.PD_GRAV, t=0.0,
    wrench=None, terms=None,
):
    """Exact dV/dt of :func:`lyapunov_value` along the plant, for any applied u.

    Uses the skew-symmetry of Mdot - 2(C1 + C2), so
    ``dV/dt = qd^T (u + tau_visc + F_c + G_c) - qd^T D qd + e^T K_p (qd - qd_ref) [+ PID terms]``
    where F_c, G_c are the loads the law is meant to cancel.  With the matched
    law and a position setpoint this is ``-qd^T (K_D + D + l Upsilon) qd``.
    """
    kind = ControllerKind(kind)
    model = compile_rod(rod)
    ref = setpoint.at(t) if isinstance(setpoint, Setpoint) else Reference(*setpoint)
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    if terms is None:
        terms = dynamics.rhs_terms(model, q, qdot, wrench)
    elastic, viscous = dynamics.internal_force(model, q, qdot, parts=True)
    total = terms.grav + terms.F_tip + elastic
    # loads whose potential sits in V are excluded from the power balance
    cancelled = total - _uncancelled_force(terms, kind, elastic)
    e = q - ref.q
    Vdot = qdot @ (np.asarray(u_applied, dtype=float) + viscous + cancelled) - terms.drag_power
    Vdot += e @ gains.K_p @ (qdot - ref.qdot)
    if kind.integral:
        Vdot += 0.5 * e @ gains.K_I @ e
    return float(Vdot)
