"""Adaptive Runge-Kutta-Fehlberg 4(5) integration of the closed loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from . import control, dynamics
from .control import ControllerKind, Gains, Setpoint
from .errors import NonFinite, StepUnderflow, WindowTooLong
from .kinematics import compile_rod
from .rod import XI0, RodSpec

# Fehlberg's tableau; the 4th-order solution is propagated.
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_E = _B5 - _B4

_GROW_MAX = 5.0
_SHRINK_MIN = 0.2


@dataclass(frozen=True)
class RkfSettings:
    rel_tol: float = 1e-7
    abs_tol: float = 1e-9
    h_init: float = 1e-5
    h_min: float = 1e-12
    h_max: float = 1e-2
    safety: float = 0.9

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.h_min <= self.h_init <= self.h_max:
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")


@dataclass(frozen=True)
class StepResult:
    t: float
    y: np.ndarray
    h_next: float
    accepted: bool
    error: float
    k1_next: np.ndarray | None = None


def _finite(x, what, t, h, y):
    if not np.all(np.isfinite(x)):
        raise NonFinite(
            f"non-finite {what} at t={t:.9g}, h={h:.3g}, |y|_inf={np.max(np.abs(y)):.6g}"
        )


def rkf45_step(f, t, y, h, settings: RkfSettings, k1=None) -> StepResult:
    """One attempted Fehlberg step of size h from (t, y).

    ``k1`` may carry f(t, y) from a previous rejected attempt.  On acceptance
    ``t`` and ``y`` of the result are the new point; on rejection they are the
    old point and ``h_next`` is the retry size.
    """
    if k1 is None:
        k1 = np.asarray(f(t, y), dtype=float)
        _finite(k1, "derivative", t, h, y)
    k = [k1]
    for i in range(1, 6):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        ki = np.asarray(f(t + _C[i] * h, yi), dtype=float)
        _finite(ki, f"stage {i + 1} derivative", t, h, y)
        k.append(ki)
    K = np.array(k)
    y4 = y + h * (_B4 @ K)
    est = h * (_E @ K)
    scale = settings.abs_tol + settings.rel_tol * np.maximum(np.abs(y), np.abs(y4))
    err = float(np.max(np.abs(est) / scale)) if y.size else 0.0
    _finite(y4, "state", t, h, y)
    if err == 0.0:
        factor = _GROW_MAX
    else:
        factor = min(_GROW_MAX, max(_SHRINK_MIN, settings.safety * err ** -0.2))
    h_next = min(settings.h_max, max(settings.h_min, h * factor))
    if err <= 1.0:
        return StepResult(t + h, y4, h_next, True, err)
    if h <= settings.h_min:
        raise StepUnderflow(f"step rejected at h_min={settings.h_min:g} (t={t:.9g}, error ratio {err:.3g})")
    return StepResult(t, y, h_next, False, err, k1)


@dataclass
class Samples:
    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    rejected: list = field(default_factory=list)


def integrate(f, t0, y0, t_end, settings: RkfSettings | None = None, cadence=None, on_sample=None) -> Samples:
    """Integrate y' = f(t, y) on [t0, t_end], sampling every ``cadence``.

    Steps are shortened to land exactly on sample times.  Each sample records
    the accepted and rejected step counts since the previous sample.
    """
    settings = settings or RkfSettings()
    y = np.array(y0, dtype=float)
    t = float(t0)
    if cadence is None:
        cadence = t_end - t0
    n_out = int(round((t_end - t0) / cadence))
    if n_out < 1 or not np.isclose(t0 + n_out * cadence, t_end, rtol=1e-12, atol=1e-12):
        raise ValueError("t_end - t0 must be a positive multiple of the cadence")
    _finite(y, "initial state", t, 0.0, y)
    out = Samples()

    def record(acc, rej):
        out.t.append(t)
        out.y.append(y.copy())
        out.accepted.append(acc)
        out.rejected.append(rej)
        if on_sample is not None:
            on_sample(t, y)

    record(0, 0)
    h = settings.h_init
    k1 = None
    for j in range(1, n_out + 1):
        target = t0 + j * cadence
        acc = rej = 0
        while t < target:
            remaining = target - t
            last = h >= remaining * (1 - 1e-12)
            step = remaining if last else h
            res = rkf45_step(f, t, y, step, settings, k1)
            if res.accepted:
                acc += 1
                t, y, k1 = (target if last else res.t), res.y, None
                # a step clipped to hit the sample time does not cap the next one
                h = max(res.h_next, h) if last and res.h_next >= step else res.h_next
            else:
                rej += 1
                k1 = res.k1_next
                h = res.h_next
        record(acc, rej)
    return out


@dataclass(frozen=True)
class SimState:
    t: float
    q: np.ndarray
    qdot: np.ndarray
    err_integral: np.ndarray
    integral_energy: float = 0.0

    def __post_init__(self):
        for name in ("q", "qdot", "err_integral"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)):
                raise NonFinite(f"{name} is not finite")
            object.__setattr__(self, name, v)

    @classmethod
    def rest(cls, q, t=0.0) -> "SimState":
        q = np.asarray(q, dtype=float)
        return cls(t, q, np.zeros_like(q), np.zeros_like(q))

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q, self.qdot, self.err_integral, [self.integral_energy]])

    @classmethod
    def unpack(cls, t, y, dof) -> "SimState":
        return cls(t, y[:dof], y[dof : 2 * dof], y[2 * dof : 3 * dof], float(y[3 * dof]))


@dataclass(frozen=True)
class ClosedLoop:
    """Plant, law, gains and setpoint.

    ``tip_wrench`` is a base-frame (moment, force) load at the actuation point.
    ``model_rod`` is the rod the controller believes in when it cancels the tip
    and gravity terms; it defaults to the plant.
    """

    rod: RodSpec
    kind: ControllerKind
    gains: Gains
    setpoint: Setpoint
    tip_wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))
    model_rod: RodSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ControllerKind(self.kind))
        object.__setattr__(self, "tip_wrench", np.asarray(self.tip_wrench, dtype=float))
        if self.gains.dof != self.rod.dof or self.setpoint.dof != self.rod.dof:
            raise ValueError("gains, setpoint and rod disagree on the number of coordinates")

    @property
    def dof(self) -> int:
        return self.rod.dof

    def _compensation(self, q, qdot, terms):
        if self.model_rod is None or self.model_rod is self.rod:
            return terms.F_tip, terms.grav
        model = dynamics.rhs_terms(self.model_rod, q, qdot, self.tip_wrench)
        return model.F_tip, model.grav

    def evaluate(self, t, state: SimState):
        """(qddot, u, terms, reference) at one state."""
        q, qdot = state.q, state.qdot
        terms = dynamics.rhs_terms(self.rod, q, qdot, self.tip_wrench)
        F_c, G_c = self._compensation(q, qdot, terms)
        ref = self.setpoint.at(t)
        u = control.control_law(self.kind, self.gains, q, qdot, ref, F_c, G_c, state.err_integral)
        qddot = dynamics.solve_mass(terms.M, u + terms.tau_int + terms.F_tip + terms.grav - terms.bias)
        return qddot, u, terms, ref

    def rhs(self, t, y):
        n = self.dof
        state = SimState.unpack(t, y, n)
        qddot, _, _, ref = self.evaluate(t, state)
        e = state.q - ref.q
        zdot = control.integral_rate(self.gains, e, state.err_integral)
        sdot = e @ self.gains.K_I @ e if self.kind.integral else 0.0
        return np.concatenate([state.qdot, qddot, zdot, [sdot]])

    def lyapunov(self, t, state: SimState, u=None, terms=None):
        tip_force = self.tip_wrench[3:]
        V = control.lyapunov_value(
            self.rod, self.gains, state.q, state.qdot, self.setpoint, state.err_integral,
            kind=self.kind, t=t, tip_force=tip_force, integral_energy=state.integral_energy,
        )
        if u is None:
            _, u, terms, _ = self.evaluate(t, state)
        Vdot = control.lyapunov_rate(
            self.rod, self.gains, state.q, state.qdot, u, self.setpoint, state.err_integral,
            kind=self.kind, t=t, wrench=self.tip_wrench, terms=terms,
        )
        return V, Vdot


@dataclass(frozen=True)
class Trajectory:
    """Samples at a fixed cadence; step counts are per preceding interval."""

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    u: np.ndarray
    V: np.ndarray
    Vdot: np.ndarray
    accepted: np.ndarray
    rejected: np.ndarray
    err_integral: np.ndarray
    q_ref: np.ndarray
    qdot_ref: np.ndarray

    def __len__(self):
        return len(self.t)

    @property
    def dof(self) -> int:
        return self.q.shape[1]

    @property
    def total_accepted(self) -> int:
        return int(self.accepted.sum())

    @property
    def total_rejected(self) -> int:
        return int(self.rejected.sum())

    def rows(self) -> np.ndarray:
        """(t, accepted, rejected, q, qdot, u, V, Vdot) per sample: 2 + 18N + 3 columns."""
        return np.column_stack(
            [self.t, self.accepted, self.rejected, self.q, self.qdot, self.u, self.V, self.Vdot]
        )


def simulate(loop: ClosedLoop, initial: SimState, t_end, cadence=0.1, settings: RkfSettings | None = None) -> Trajectory:
    settings = settings or RkfSettings()
    setpoint = loop.setpoint.started(initial.q)
    if setpoint is not loop.setpoint:
        loop = ClosedLoop(loop.rod, loop.kind, loop.gains, setpoint, loop.tip_wrench, loop.model_rod)
    n = loop.dof
    rows = []

    def on_sample(t, y):
        state = SimState.unpack(t, y, n)
        _, u, terms, ref = loop.evaluate(t, state)
        V, Vdot = loop.lyapunov(t, state, u, terms)
        rows.append((u, V, Vdot, ref.q, ref.qdot))

    s = integrate(loop.rhs, initial.t, initial.pack(), initial.t + t_end, settings, cadence, on_sample)
    Y = np.array(s.y)
    u, V, Vdot, qr, qdr = (np.array(c) for c in zip(*rows))
    return Trajectory(
        t=np.array(s.t), q=Y[:, :n], qdot=Y[:, n : 2 * n], u=u, V=V, Vdot=Vdot,
        accepted=np.array(s.accepted), rejected=np.array(s.rejected), err_integral=Y[:, 2 * n : 3 * n],
        q_ref=qr, qdot_ref=qdr,
    )


def static_equilibrium(rod, wrench=None, q_guess=None, u=None, tol=1e-12) -> np.ndarray:
    """Configuration where elastic, tip and gravity loads balance (plus u if given)."""
    model = compile_rod(rod)
    q0 = np.tile(XI0, model.n) if q_guess is None else np.asarray(q_guess, dtype=float)
    zero = np.zeros(model.dof)
    u = zero if u is None else np.asarray(u, dtype=float)

    def residual(q):
        terms = dynamics.rhs_terms(model, q, zero, wrench)
        return terms.tau_int + terms.F_tip + terms.grav + u

    # scale rows by the section stiffness so every coordinate counts alike
    scale = (model.lengths[:, None] * model.stiffness_sec).ravel()
    sol = root(lambda q: residual(q) / scale, q0, method="hybr", tol=tol)
    res = np.max(np.abs(residual(sol.x) / scale))
    if not sol.success and res > 1e-9:
        raise ArithmeticError(f"static equilibrium not found: {sol.message} (residual {res:.3g})")
    return sol.x


def tracking_error(traj: Trajectory, mode: str) -> np.ndarray:
    """Error of the controlled quantity: q - q_ref (position) or qdot - qdot_ref (velocity)."""
    if mode == "position":
        return traj.q - traj.q_ref
    if mode == "velocity":
        return traj.qdot - traj.qdot_ref
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class SteadyState:
    ss_error: np.ndarray
    settled: bool
    settle_time: float | None


def steady_state_metrics(traj: Trajectory, setpoint: Setpoint, window: float, qdot_tol=1e-4, var_tol=1e-5) -> SteadyState:
    """Mean error over the final window and the first time the arm stays settled.

    A window ending at t_k is settled when |qdot|_inf < qdot_tol on all its
    samples and every error component varies by less than var_tol across it.
    ``settle_time`` is the earliest window end after which every window is
    settled.
    """
    span = traj.t[-1] - traj.t[0]
    if window <= 0 or window > span * (1 + 1e-12):
        raise WindowTooLong(f"window {window} s does not fit in a {span} s trajectory")
    e = tracking_error(traj, setpoint.mode)
    t = traj.t
    final = t >= t[-1] - window - 1e-12
    ss = e[final].mean(axis=0)
    ok = []
    ends = np.nonzero(t >= t[0] + window - 1e-12)[0]
    for k in ends:
        sl = (t >= t[k] - window - 1e-12) & (t <= t[k])
        vel = np.max(np.abs(traj.qdot[sl])) < qdot_tol
        var = np.max(e[sl].max(axis=0) - e[sl].min(axis=0)) < var_tol
        ok.append(vel and var)
    ok = np.array(ok)
    settled = bool(ok[-1])
    settle_time = None
    if settled:
        bad = np.nonzero(~ok)[0]
        first = 0 if bad.size == 0 else bad[-1] + 1
        settle_time = float(t[ends[first]])
    return SteadyState(ss, settled, settle_time)


def zero_crossings(e, deadband=1e-6) -> int:
    """Sign changes per column, ignoring samples inside the deadband, summed."""
    e = np.atleast_2d(np.asarray(e, dtype=float).T).T
    total = 0
    for col in e.T:
        s = np.sign(col[np.abs(col) > deadband])
        total += int(np.count_nonzero(s[1:] != s[:-1]))
    return total


def overshoot(traj: Trajectory, mode: str) -> float:
    return float(np.max(np.abs(tracking_error(traj, mode))))
