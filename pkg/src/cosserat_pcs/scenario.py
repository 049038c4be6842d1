"""Scenario files: TOML documents describing one closed-loop experiment.

Every field has a default, unknown keys are rejected, and :func:`dump` writes
the fully resolved document, which loads back to the same scenario.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli_w

from .control import ControllerKind, Gains, Setpoint, gain_matrix
from .errors import ScenarioError
from .rod import GRAVITY, XI0, MaterialParams, Medium, RodSpec, SectionGeometry
from .sim import ClosedLoop, RkfSettings, SimState, static_equilibrium

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_AXES = {"x": 0, "y": 1, "z": 2}

# section -> key -> default; None marks keys that are filled in from other fields
DEFAULTS = {
    "rod": {"sections": 4, "radius": 0.1, "length": 0.2, "microsolids": 41},
    "material": {"E": 110e3, "mu": 3e3, "poisson": 0.45, "rho": 2000.0},
    "medium": {"kind": "air", "rho_f": None, "c_d": None, "kappa": None},
    "actuation": {"kind": "cable", "tip_load_N": 0.0, "tip_load_axis": "y", "X_bar": None},
    "controller": {"kind": None, "mode": "position", "K_p": 1.0, "K_D": 0.1, "K_I": 0.0, "integral_bound": np.inf},
    "setpoint": {"q_d": "rest", "qdot_d": 0.0},
    "initial": {"state": "rest", "q": None},
    "integrator": {
        "rel_tol": 1e-7, "abs_tol": 1e-9, "t_end": 60.0, "cadence": 0.1,
        "h_init": 1e-5, "h_min": 1e-12, "h_max": 1e-2, "safety": 0.9,
    },
    "output": {"csv_path": None, "plot_path": None, "window": 0.1, "plot_coordinate": None},
}
_WATER = {"rho_f": 997.0, "c_d": 0.82, "kappa": 1.0}
_INITIAL_STATES = ("rest", "loaded_equilibrium", "given")


def _fail(key, msg):
    raise ScenarioError(f"{key}: {msg}")


def _number(key, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(key, f"expected a number, got {v!r}")
    v = float(v)
    if np.isnan(v) or (positive and not v > 0) or (nonneg and not v >= 0):
        _fail(key, f"out of range: {v!r}")
    return v


def _vector(key, v, n_sections, allow_scalar=True):
    """Scalar, 6N list or N x 6 nested list -> flat 6N array."""
    dof = 6 * n_sections
    if allow_scalar and isinstance(v, (int, float)) and not isinstance(v, bool):
        return np.full(dof, float(v))
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        _fail(key, f"expected a number or list of numbers, got {v!r}")
    if a.size != dof or a.ndim not in (1, 2) or (a.ndim == 2 and a.shape != (n_sections, 6)):
        _fail(key, f"expected {dof} values or {n_sections} x 6 nested list, got shape {a.shape}")
    return a.ravel()


def _nested(a, n):
    return np.asarray(a, dtype=float).reshape(n, 6).tolist()


def load_text(text: str, name="scenario") -> dict:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{name}: not valid TOML: {exc}") from exc
    return resolve(doc)


def load(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read: {exc}") from exc
    doc = load_text(text, str(path))
    out = doc["output"]
    if out["csv_path"] is None:
        out["csv_path"] = f"{path.stem}.csv"
    if out["plot_path"] is None:
        out["plot_path"] = f"{path.stem}.svg"
    return doc


def resolve(doc: dict) -> dict:
    """Validate a raw document and fill every default; returns a new dict."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a table")
    for section in doc:
        if section not in DEFAULTS:
            _fail(section, "unknown section")
        if not isinstance(doc[section], dict):
            _fail(section, "must be a table")
        for key in doc[section]:
            if key not in DEFAULTS[section]:
                _fail(f"{section}.{key}", "unknown key")
    r = copy.deepcopy(DEFAULTS)
    for section, table in doc.items():
        r[section].update(copy.deepcopy(table))

    rod = r["rod"]
    if isinstance(rod["sections"], bool) or not isinstance(rod["sections"], int) or rod["sections"] < 1:
        _fail("rod.sections", "must be a positive integer")
    n = rod["sections"]
    if isinstance(rod["microsolids"], bool) or not isinstance(rod["microsolids"], int) or rod["microsolids"] < 2:
        _fail("rod.microsolids", "must be an integer >= 2")
    rod["length"] = _number("rod.length", rod["length"], positive=True)
    if isinstance(rod["radius"], list):
        if len(rod["radius"]) != n:
            _fail("rod.radius", f"expected {n} radii")
        rod["radius"] = [_number("rod.radius", x, positive=True) for x in rod["radius"]]
    else:
        rod["radius"] = _number("rod.radius", rod["radius"], positive=True)

    mat = r["material"]
    mat["E"] = _number("material.E", mat["E"], positive=True)
    mat["mu"] = _number("material.mu", mat["mu"], nonneg=True)
    mat["poisson"] = _number("material.poisson", mat["poisson"], nonneg=True)
    if mat["poisson"] >= 0.5:
        _fail("material.poisson", "must be below 0.5")
    mat["rho"] = _number("material.rho", mat["rho"], positive=True)

    med = r["medium"]
    if med["kind"] not in ("air", "water"):
        _fail("medium.kind", f"expected 'air' or 'water', got {med['kind']!r}")
    for key in ("rho_f", "c_d", "kappa"):
        if med[key] is None:
            med[key] = _WATER[key] if med["kind"] == "water" else 0.0
        med[key] = _number(f"medium.{key}", med[key], nonneg=True)
        if med["kind"] == "air" and med[key] != 0:
            _fail(f"medium.{key}", "must be 0 in air")

    act = r["actuation"]
    if act["kind"] not in ("cable", "fluid"):
        _fail("actuation.kind", f"expected 'cable' or 'fluid', got {act['kind']!r}")
    act["tip_load_N"] = _number("actuation.tip_load_N", act["tip_load_N"])
    axis = act["tip_load_axis"]
    if isinstance(axis, str):
        if axis not in _AXES:
            _fail("actuation.tip_load_axis", f"expected x, y, z or a 3-vector, got {axis!r}")
    else:
        a = np.asarray(axis, dtype=float) if isinstance(axis, list) else None
        if a is None or a.shape != (3,) or not np.linalg.norm(a) > 0:
            _fail("actuation.tip_load_axis", "expected x, y, z or a nonzero 3-vector")
        act["tip_load_axis"] = a.tolist()
    if act["X_bar"] is None:
        act["X_bar"] = rod["length"]
    act["X_bar"] = _number("actuation.X_bar", act["X_bar"], nonneg=True)
    if act["X_bar"] > rod["length"] * (1 + 1e-12):
        _fail("actuation.X_bar", f"outside the rod [0, {rod['length']}]")

    ctl = r["controller"]
    if ctl["kind"] is None:
        ctl["kind"] = "pd_cable" if act["kind"] == "cable" else "pd_fluid"
    try:
        kind = ControllerKind(ctl["kind"])
    except ValueError:
        _fail("controller.kind", f"expected one of {[k.value for k in ControllerKind]}, got {ctl['kind']!r}")
    if kind is ControllerKind.PD_FLUID and act["kind"] == "cable":
        _fail("controller.kind", "pd_fluid is the law for fluid actuation")
    if kind is ControllerKind.PD_CABLE and act["kind"] == "fluid":
        _fail("controller.kind", "pd_cable is the law for cable actuation")
    if ctl["mode"] not in ("position", "velocity"):
        _fail("controller.mode", f"expected 'position' or 'velocity', got {ctl['mode']!r}")
    for key in ("K_p", "K_D", "K_I"):
        try:
            K = gain_matrix(ctl[key], n)
        except (ValueError, TypeError) as exc:
            _fail(f"controller.{key}", str(exc))
        if not np.allclose(K, np.diag(np.diag(K))):
            _fail(f"controller.{key}", "only diagonal gains are supported in scenario files")
        ctl[key] = _nested(np.diag(K), n)
    ctl["integral_bound"] = _number("controller.integral_bound", ctl["integral_bound"], positive=True)
    try:
        Gains.build(n, ctl["K_p"], ctl["K_D"], ctl["K_I"], ctl["integral_bound"])
    except ValueError as exc:
        _fail("controller", str(exc))

    sp = r["setpoint"]
    if isinstance(sp["q_d"], str):
        if sp["q_d"] != "rest":
            _fail("setpoint.q_d", "expected 'rest' or a list")
        sp["q_d"] = _nested(np.tile(XI0, n), n)
    else:
        sp["q_d"] = _nested(_vector("setpoint.q_d", sp["q_d"], n, allow_scalar=False), n)
    sp["qdot_d"] = _nested(_vector("setpoint.qdot_d", sp["qdot_d"], n), n)

    ini = r["initial"]
    if ini["state"] not in _INITIAL_STATES:
        _fail("initial.state", f"expected one of {_INITIAL_STATES}, got {ini['state']!r}")
    if ini["state"] == "given":
        if ini["q"] is None:
            _fail("initial.q", "required when initial.state = 'given'")
        ini["q"] = _nested(_vector("initial.q", ini["q"], n, allow_scalar=False), n)
    elif ini["q"] is not None:
        _fail("initial.q", "only allowed when initial.state = 'given'")
    else:
        del ini["q"]

    integ = r["integrator"]
    for key in integ:
        integ[key] = _number(f"integrator.{key}", integ[key], positive=True)
    try:
        RkfSettings(**{k: integ[k] for k in ("rel_tol", "abs_tol", "h_init", "h_min", "h_max", "safety")})
    except ValueError as exc:
        _fail("integrator", str(exc))
    steps = integ["t_end"] / integ["cadence"]
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        _fail("integrator.cadence", "t_end must be a whole multiple of the cadence")

    out = r["output"]
    for key in ("csv_path", "plot_path"):
        if out[key] is not None and not isinstance(out[key], str):
            _fail(f"output.{key}", "must be a string path")
    out["window"] = _number("output.window", out["window"], positive=True)
    if out["window"] > integ["t_end"]:
        _fail("output.window", "longer than integrator.t_end")
    pc = out["plot_coordinate"]
    if pc is not None and (isinstance(pc, bool) or not isinstance(pc, int) or not 1 <= pc <= 6):
        _fail("output.plot_coordinate", "expected an integer in 1..6")
    return r


def dump(doc: dict) -> str:
    """TOML text of a resolved scenario (absent optional keys are omitted)."""
    clean = {s: {k: v for k, v in t.items() if v is not None} for s, t in doc.items()}
    return tomli_w.dumps(clean)


def tip_wrench(doc) -> np.ndarray:
    act = doc["actuation"]
    axis = act["tip_load_axis"]
    if isinstance(axis, str):
        direction = np.eye(3)[_AXES[axis]]
    else:
        direction = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    return np.concatenate([np.zeros(3), act["tip_load_N"] * direction])


def build_rod(doc) -> RodSpec:
    rod, mat, med = doc["rod"], doc["material"], doc["medium"]
    n = rod["sections"]
    radii = rod["radius"] if isinstance(rod["radius"], list) else [rod["radius"]] * n
    sections = tuple(SectionGeometry(r, rod["length"] / n, rod["microsolids"]) for r in radii)
    return RodSpec(
        sections=sections,
        material=MaterialParams(mat["E"], mat["mu"], mat["poisson"], mat["rho"]),
        medium=Medium(med["kind"], med["rho_f"], med["c_d"], med["kappa"]),
        cable_point=doc["actuation"]["X_bar"],
        gravity=GRAVITY.copy(),
    )


@dataclass(frozen=True)
class Experiment:
    """A resolved scenario turned into library objects."""

    doc: dict
    rod: RodSpec
    loop: ClosedLoop
    initial: SimState
    settings: RkfSettings
    t_end: float
    cadence: float

    @property
    def mode(self) -> str:
        return self.loop.setpoint.mode


def build(doc) -> Experiment:
    rod = build_rod(doc)
    n = rod.n_sections
    ctl, sp = doc["controller"], doc["setpoint"]
    gains = Gains.build(n, ctl["K_p"], ctl["K_D"], ctl["K_I"], ctl["integral_bound"])
    if ctl["mode"] == "position":
        setpoint = Setpoint.position(np.ravel(sp["q_d"]))
    else:
        setpoint = Setpoint.velocity(np.ravel(sp["qdot_d"]))
    wrench = tip_wrench(doc)
    loop = ClosedLoop(rod, ControllerKind(ctl["kind"]), gains, setpoint, wrench)
    ini = doc["initial"]
    if ini["state"] == "rest":
        q0 = np.tile(XI0, n)
    elif ini["state"] == "loaded_equilibrium":
        q0 = static_equilibrium(rod, wrench)
    else:
        q0 = np.ravel(ini["q"])
    integ = doc["integrator"]
    settings = RkfSettings(**{k: integ[k] for k in ("rel_tol", "abs_tol", "h_init", "h_min", "h_max", "safety")})
    return Experiment(doc, rod, loop, SimState.rest(q0), settings, integ["t_end"], integ["cadence"])
