"""Numerical certificates for the structural properties of the PCS dynamics.

Each suite samples states from a seeded generator, returns its worst-case
statistic and, on failure, the offending sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import dynamics
from .kinematics import compile_rod
from .rod import XI0, MaterialParams, Medium, RodSpec
from .sim import RkfSettings, integrate

DEFAULT_SEED = 20240607


def random_configuration(rng, n_sections, bend=4.0, shear=0.2, stretch=0.2):
    """Strains around the straight rod: curvatures/torsion in [-bend, bend] rad/m,
    shears in [-shear, shear] and stretch in [1 - stretch, 1 + stretch]."""
    xi = np.empty((n_sections, 6))
    xi[:, :3] = rng.uniform(-bend, bend, (n_sections, 3))
    xi[:, 3] = 1.0 + rng.uniform(-stretch, stretch, n_sections)
    xi[:, 4:] = rng.uniform(-shear, shear, (n_sections, 2))
    return xi.ravel()


def default_rod(medium="air") -> RodSpec:
    return RodSpec.uniform(medium=Medium.water() if medium == "water" else Medium.air())


@dataclass
class SuiteResult:
    name: str
    passed: bool
    statistic: str
    seed: int
    samples: int
    details: dict = field(default_factory=dict)
    offending: dict | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.statistic} (seed={self.seed}, samples={self.samples})"


def suite_spd(samples=100, seed=DEFAULT_SEED, rod=None) -> SuiteResult:
    rod = rod or default_rod()
    rng = np.random.default_rng(seed)
    worst_sym, worst_eig, bad = 0.0, np.inf, None
    for _ in range(samples):
        q = random_configuration(rng, rod.n_sections)
        M = dynamics.mass_matrix(rod, q)
        sym = np.linalg.norm(M - M.T) / np.linalg.norm(M)
        lam = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
        if (sym >= 1e-10 or lam <= 0) and bad is None:
            bad = {"q": q.tolist(), "asymmetry": sym, "eig_min": lam}
        worst_sym, worst_eig = max(worst_sym, sym), min(worst_eig, lam)
    ok = bad is None
    stat = f"max relative asymmetry {worst_sym:.3e}, min eigenvalue {worst_eig:.6e}"
    return SuiteResult("spd", ok, stat, seed, samples, {"asymmetry": worst_sym, "eig_min": worst_eig}, bad)


def suite_bound(samples=10000, seed=DEFAULT_SEED, rod=None, floor=1e-8) -> SuiteResult:
    rod = rod or default_rod()
    rng = np.random.default_rng(seed)
    zero = np.zeros(rod.dof)
    worst, at = np.inf, None
    for _ in range(samples):
        q = random_configuration(rng, rod.n_sections)
        lam = np.linalg.eigvalsh(dynamics.rhs_terms(rod, q, zero).M)[0]
        if lam < worst:
            worst, at = lam, q
    ok = worst > floor
    stat = f"empirical lower bound m = {worst:.6e} (floor {floor:g})"
    bad = None if ok else {"q": at.tolist(), "eig_min": worst}
    return SuiteResult("bound", ok, stat, seed, samples, {"m": worst}, bad)


def mass_rate_fd(rod, q, qdot, h=1e-6):
    """Central difference of M along qdot."""
    zero = np.zeros_like(q)
    Mp = dynamics.rhs_terms(rod, q + 0.5 * h * qdot, zero).M
    Mm = dynamics.rhs_terms(rod, q - 0.5 * h * qdot, zero).M
    return (Mp - Mm) / h


def skew_residual(rod, q, qdot, v, h=1e-6):
    T = dynamics.assemble(rod, q, qdot)
    Md = mass_rate_fd(rod, q, qdot, h)
    N = Md - 2 * (T.C1 + T.C2)
    return abs(v @ N @ v) / (v @ v * np.linalg.norm(Md))


def suite_skew(samples=100, seed=DEFAULT_SEED, rod=None, tol=1e-5) -> SuiteResult:
    rod = rod or default_rod()
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, None
    for _ in range(samples):
        q = random_configuration(rng, rod.n_sections)
        qdot = rng.standard_normal(rod.dof)
        v = rng.standard_normal(rod.dof)
        r = skew_residual(rod, q, qdot, v)
        if r >= tol and bad is None:
            bad = {"q": q.tolist(), "qdot": qdot.tolist(), "v": v.tolist(), "residual": r}
        worst = max(worst, r)
    stat = f"max normalized |v^T (Mdot - 2(C1+C2)) v| = {worst:.3e} (tol {tol:g})"
    return SuiteResult("skew", bad is None, stat, seed, samples, {"residual": worst}, bad)


def suite_linparam(samples=100, seed=DEFAULT_SEED, rod=None, tol=1e-8) -> SuiteResult:
    rod = rod or RodSpec.uniform(medium=Medium.water(), cable_point=0.17)
    rng = np.random.default_rng(seed)
    worst, worst_scale, bad = 0.0, 0.0, None
    for _ in range(samples):
        q = random_configuration(rng, rod.n_sections)
        qdot = rng.standard_normal(rod.dof)
        qddot = rng.standard_normal(rod.dof)
        wrench = rng.standard_normal(6)
        T = dynamics.assemble(rod, q, qdot, wrench)
        lhs = T.M @ qddot + (T.C1 + T.C2 + T.D) @ qdot - T.F_tip - T.grav - T.tau_int
        Y, theta = dynamics.regressor(rod, q, qdot, qddot, wrench=wrench)
        r = np.linalg.norm(Y @ theta - lhs) / np.linalg.norm(lhs)
        s = np.max(np.abs(Y @ (2 * theta) - 2 * (Y @ theta)))
        if (r >= tol or s != 0) and bad is None:
            bad = {"q": q.tolist(), "qdot": qdot.tolist(), "qddot": qddot.tolist(), "residual": r}
        worst, worst_scale = max(worst, r), max(worst_scale, s)
    stat = f"max relative regressor residual {worst:.3e} (tol {tol:g}), doubling defect {worst_scale:g}"
    return SuiteResult("linparam", bad is None, stat, seed, samples, {"residual": worst, "doubling": worst_scale}, bad)


def free_rod(rod=None) -> RodSpec:
    """Undamped rod in air with gravity switched off."""
    rod = rod or default_rod()
    mat = replace(rod.material, shear_viscosity=0.0)
    return RodSpec(rod.sections, mat, Medium.air(), rod.base_transform, rod.cable_point, np.zeros(6))


def total_energy(rod, q, qdot) -> float:
    M = dynamics.rhs_terms(rod, q, np.zeros_like(q)).M
    return 0.5 * qdot @ M @ qdot + dynamics.elastic_energy(rod, q)


def energy_drift(rod, q0, qdot0, t_end=1.0, rel_tol=1e-9, abs_tol=1e-11, cadence=0.05):
    """Relative drift of kinetic plus elastic energy along an unforced run."""
    model = compile_rod(rod)
    n = model.dof
    zero = np.zeros(n)

    def f(t, y):
        return np.concatenate([y[n:], dynamics.forward_dynamics(model, y[:n], y[n:], zero)])

    settings = RkfSettings(rel_tol=rel_tol, abs_tol=abs_tol, h_init=1e-6)
    out = integrate(f, 0.0, np.concatenate([q0, qdot0]), t_end, settings, cadence)
    E = np.array([total_energy(model, y[:n], y[n:]) for y in out.y])
    return float(np.max(np.abs(E - E[0])) / abs(E[0])), E, out


def suite_energy(samples=1, seed=DEFAULT_SEED, rod=None, tol=1e-4, t_end=1.0) -> SuiteResult:
    rod = free_rod(rod)
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, None
    for _ in range(samples):
        q0 = np.tile(XI0, rod.n_sections) + 0.1 * (random_configuration(rng, rod.n_sections) - np.tile(XI0, rod.n_sections))
        qdot0 = 0.1 * rng.standard_normal(rod.dof)
        drift, _, _ = energy_drift(rod, q0, qdot0, t_end)
        if drift >= tol and bad is None:
            bad = {"q0": q0.tolist(), "qdot0": qdot0.tolist(), "drift": drift}
        worst = max(worst, drift)
    stat = f"max relative energy drift over {t_end:g} s = {worst:.3e} (tol {tol:g})"
    return SuiteResult("energy", bad is None, stat, seed, samples, {"drift": worst}, bad)


def suite_passivity(samples=1000, seed=DEFAULT_SEED, rod=None) -> SuiteResult:
    rod = rod or default_rod("water")
    rng = np.random.default_rng(seed)
    worst_d, worst_v, bad = np.inf, -np.inf, None
    for _ in range(samples):
        q = random_configuration(rng, rod.n_sections)
        qdot = rng.standard_normal(rod.dof) * rng.choice([1e-3, 1.0, 10.0])
        pd = dynamics.rhs_terms(rod, q, qdot).drag_power
        _, visc = dynamics.internal_force(rod, q, qdot, parts=True)
        pv = float(visc @ qdot)
        if (pd < 0 or pv > 0) and bad is None:
            bad = {"q": q.tolist(), "qdot": qdot.tolist(), "drag_power": pd, "viscous_power": pv}
        worst_d, worst_v = min(worst_d, pd), max(worst_v, pv)
    stat = f"min qdot^T D qdot = {worst_d:.3e}, max <tau_visc, qdot> = {worst_v:.3e}"
    return SuiteResult("passivity", bad is None, stat, seed, samples, {"drag": worst_d, "viscous": worst_v}, bad)


SUITES = {
    "spd": suite_spd,
    "bound": suite_bound,
    "skew": suite_skew,
    "linparam": suite_linparam,
    "energy": suite_energy,
    "passivity": suite_passivity,
}


def run(name, seed=DEFAULT_SEED, samples=None):
    names = list(SUITES) if name == "all" else [name]
    out = []
    for n in names:
        kw = {"seed": seed}
        if samples is not None:
            kw["samples"] = samples
        out.append(SUITES[n](**kw))
    return out
