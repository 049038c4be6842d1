"""Piecewise-constant-strain kinematics: frames, body Jacobians and their rates.

Within section ``s`` (start ``X_{s-1}``, local offset ``x``) the pose is
``g(X) = g(X_{s-1}) exp(xi_s x)`` and the body Jacobian obeys

    J(X) = Ad^{-1}_{exp(xi_s x)} J(X_{s-1}) + T_{xi_s}(x) E_s

where ``E_s`` selects the columns of section ``s``.  Poses used internally are
relative to the arm base; :func:`forward_kinematics` reports them in the
inertial frame.

Jacobian rates are obtained by complex-step differentiation of the analytic
Jacobian map, which is exact to rounding because every kernel operation in
:mod:`.se3` is holomorphic.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from . import se3
from .errors import DimensionMismatch, PointOutsideRod
from .rod import RodSpec, discretize

_COMPLEX_STEP = 1e-20


class PcsModel:
    """A :class:`RodSpec` compiled onto its microsolid grid.

    Holds per-node screw tensor diagonals so that assembly is a handful of
    batched array operations.
    """

    def __init__(self, rod: RodSpec):
        self.rod = rod
        self.grid = discretize(rod)
        self.n = rod.n_sections
        self.dof = 6 * self.n
        self.boundaries = rod.boundaries
        self.lengths = np.array([s.length for s in rod.sections])
        tensors = rod.tensors()
        self.tensors = tensors
        sec = self.grid.section
        diag = lambda name: np.array([np.diag(getattr(t, name)) for t in tensors])
        self.inertia_sec = diag("inertia")
        self.added_sec = diag("added_mass")
        self.stiffness_sec = diag("stiffness")
        self.viscosity_sec = diag("viscosity")
        self.drag_sec = diag("drag")
        # per-node diagonals
        self.m_a = (self.inertia_sec + self.added_sec)[sec]
        self.m = self.inertia_sec[sec]
        self.drag = self.drag_sec[sec]
        self.weights = self.grid.weights
        self.g_r = np.asarray(rod.base_transform, dtype=float)
        self.x_bar = rod.actuation_point
        self._node_split = self._split(self.grid.abscissae)
        self._bar_split = self._split(np.array([self.x_bar]))

    def _split(self, X):
        """Assign abscissae to sections; returns per-section (indices, local offsets)."""
        X = np.asarray(X, dtype=float)
        L = self.boundaries[-1]
        if np.any(X < -1e-15) or np.any(X > L + 1e-12):
            raise PointOutsideRod(f"abscissae must lie in [0, {L}]")
        X = np.clip(X, 0.0, L)
        sec = np.clip(np.searchsorted(self.boundaries, X, side="left") - 1, 0, self.n - 1)
        out = []
        for s in range(self.n):
            idx = np.nonzero(sec == s)[0]
            loc = np.clip(X[idx] - self.boundaries[s], 0.0, self.lengths[s])
            out.append((idx, loc))
        return out


_MODELS: "weakref.WeakKeyDictionary[RodSpec, PcsModel]" = weakref.WeakKeyDictionary()


def compile_rod(rod) -> PcsModel:
    if isinstance(rod, PcsModel):
        return rod
    model = _MODELS.get(rod)
    if model is None:
        model = _MODELS[rod] = PcsModel(rod)
    return model


def _check_q(model: PcsModel, q, name="q"):
    q = np.asarray(q)
    if q.shape != (model.dof,):
        raise DimensionMismatch(f"{name} has shape {q.shape}, expected ({model.dof},)")
    if not np.iscomplexobj(q):
        q = q.astype(float)
    return q


def _chain(model: PcsModel, q, splits):
    """Poses (base-relative) and body Jacobians at the points described by ``splits``.

    The per-point exponentials and tangent maps are independent of the chain,
    so they are evaluated in one batch; only the N section ends are propagated
    sequentially.
    """
    n = model.n
    xi = q.reshape(n, 6)
    idx = np.concatenate([i for i, _ in splits] + [np.arange(n) + 10**9])
    sec = np.concatenate([np.full(len(i), s) for s, (i, _) in enumerate(splits)] + [np.arange(n)])
    x = np.concatenate([loc for _, loc in splits] + [model.lengths])
    h = se3.exp_se3(xi[sec], x)
    Ai = se3.adjoint_inv(h)
    T = se3.exp_tangent(xi[sec], x)
    m = len(x) - n
    g_start = np.empty((n, 4, 4), dtype=q.dtype)
    J_start = np.zeros((n, 6, model.dof), dtype=q.dtype)
    g_start[0] = np.eye(4)
    for s in range(n - 1):
        e = m + s
        g_start[s + 1] = g_start[s] @ h[e]
        J_start[s + 1] = Ai[e] @ J_start[s]
        J_start[s + 1][:, 6 * s : 6 * s + 6] = T[e]
    g_pts = g_start[sec[:m]] @ h[:m]
    J_pts = Ai[:m] @ J_start[sec[:m]]
    J_pts.reshape(m, 6, n, 6)[np.arange(m), :, sec[:m], :] = T[:m]
    g_out = np.empty_like(g_pts)
    J_out = np.empty_like(J_pts)
    g_out[idx[:m]] = g_pts
    J_out[idx[:m]] = J_pts
    return g_out, J_out


@dataclass(frozen=True)
class FrameField:
    """Inertial-frame poses at the grid nodes and at the tip."""

    abscissae: np.ndarray
    nodes: np.ndarray
    tip: np.ndarray


@dataclass(frozen=True)
class JacobianField:
    abscissae: np.ndarray
    J: np.ndarray  # (n_nodes, 6, 6N)

    def __len__(self):
        return len(self.J)


def forward_kinematics(rod, q) -> FrameField:
    model = compile_rod(rod)
    q = _check_q(model, q)
    X = np.append(model.grid.abscissae, model.boundaries[-1])
    g, _ = _chain(model, q, model._split(X))
    g = model.g_r @ g
    return FrameField(model.grid.abscissae, g[:-1], g[-1])


def poses_at(rod, q, X, inertial=True):
    """Poses at arbitrary abscissae X (array)."""
    model = compile_rod(rod)
    q = _check_q(model, q)
    g, _ = _chain(model, q, model._split(np.atleast_1d(X)))
    return model.g_r @ g if inertial else g


def jacobian_at(rod, q, X):
    """Body Jacobians at arbitrary abscissae X, shape (len(X), 6, 6N)."""
    model = compile_rod(rod)
    q = _check_q(model, q)
    return _chain(model, q, model._split(np.atleast_1d(X)))[1]


def jacobian_field(rod, q) -> JacobianField:
    model = compile_rod(rod)
    q = _check_q(model, q)
    return JacobianField(model.grid.abscissae, _chain(model, q, model._node_split)[1])


def _complex_step(model, q, qdot, splits):
    q = _check_q(model, q)
    qdot = _check_q(model, qdot, "qdot")
    g, J = _chain(model, q + 1j * _COMPLEX_STEP * qdot, splits)
    return g.real, J.real, J.imag / _COMPLEX_STEP


def jacobian_rate(rod, q, qdot) -> np.ndarray:
    """Per-node time derivative of the body Jacobian along (q, qdot)."""
    model = compile_rod(rod)
    return _complex_step(model, q, qdot, model._node_split)[2]


def jacobian_rate_at(rod, q, qdot, X) -> np.ndarray:
    model = compile_rod(rod)
    return _complex_step(model, q, qdot, model._split(np.atleast_1d(X)))[2]


def twist_field(J, qdot) -> np.ndarray:
    """eta(X_k) = J(X_k) qdot for every node."""
    J = J.J if isinstance(J, JacobianField) else np.asarray(J)
    qdot = np.asarray(qdot)
    if qdot.shape != (J.shape[-1],):
        raise DimensionMismatch(f"qdot has shape {qdot.shape}, expected ({J.shape[-1]},)")
    return J @ qdot


@dataclass(frozen=True)
class NodeKinematics:
    """Everything assembly needs at the grid nodes (and at the actuation point)."""

    g: np.ndarray  # base-relative poses at nodes
    J: np.ndarray
    Jdot: np.ndarray | None
    eta: np.ndarray | None
    g_bar: np.ndarray  # base-relative pose at the actuation point
    J_bar: np.ndarray


def node_kinematics(model: PcsModel, q, qdot=None) -> NodeKinematics:
    # the actuation point sits in exactly one section and is stored after the nodes
    splits = []
    nn = model.grid.abscissae.size
    for (i_n, l_n), (i_b, l_b) in zip(model._node_split, model._bar_split):
        idx = np.concatenate([i_n, np.full(len(i_b), nn)])
        splits.append((idx, np.concatenate([l_n, l_b])))
    if qdot is None:
        q = _check_q(model, q)
        g, J = _chain(model, q, splits)
        Jdot = eta = None
    else:
        g, J, Jdot = _complex_step(model, q, qdot, splits)
        Jdot = Jdot[:nn]
        eta = J[:nn] @ np.asarray(qdot, dtype=float)
    return NodeKinematics(g[:nn], J[:nn], Jdot, eta, g[nn], J[nn])


def fast_points(model: PcsModel):
    """(section, local offset) of every node followed by the actuation point."""
    if not hasattr(model, "_fast_pts"):
        bar = [(s, loc[0]) for s, (i, loc) in enumerate(model._bar_split) if len(i)][0]
        sec = np.append(model.grid.section, bar[0]).astype(np.int64)
        x = np.append(model.grid.local, bar[1]).astype(float)
        model._fast_pts = (sec, x)
    return model._fast_pts


def node_kinematics_fast(model: PcsModel, q, qdot) -> NodeKinematics:
    """Compiled equivalent of :func:`node_kinematics` (always computes rates)."""
    from . import _fast

    sec, x = fast_points(model)
    q = _check_q(model, q)
    qdot = _check_q(model, qdot, "qdot")
    qc = (q + 1j * _COMPLEX_STEP * qdot).reshape(model.n, 6)
    g, J = _fast.chain_complex(qc, model.lengths, sec, x)
    nn = len(x) - 1
    Jr = J.real
    Jdot = J[:nn].imag / _COMPLEX_STEP
    return NodeKinematics(g[:nn].real, Jr[:nn], Jdot, Jr[:nn] @ qdot, g[nn].real, Jr[nn])
