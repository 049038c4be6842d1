"""Rod description: materials, cross sections, surrounding medium, screw tensors
and the microsolid (midpoint quadrature) grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

# Twist of the undeformed, upright rod: unit stretch along the local x axis.
XI0 = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
# Gravity expressed as an acceleration twist in the inertial frame.
GRAVITY = np.array([0.0, 0.0, 0.0, -9.81, 0.0, 0.0])
WATER_DENSITY = 997.0


def default_base_transform() -> np.ndarray:
    """Base-to-inertial transform: a +90 deg rotation about the inertial z axis."""
    return np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


@dataclass(frozen=True)
class MaterialParams:
    youngs_modulus: float = 110e3
    shear_viscosity: float = 3e3
    poisson_ratio: float = 0.45
    density: float = 2000.0

    def __post_init__(self):
        if self.youngs_modulus <= 0:
            raise ValueError("youngs_modulus must be positive")
        if self.shear_viscosity < 0:
            raise ValueError("shear_viscosity must be non-negative")
        if not 0 <= self.poisson_ratio < 0.5:
            raise ValueError("poisson_ratio must lie in [0, 0.5)")
        if self.density <= 0:
            raise ValueError("density must be positive")

    @property
    def shear_modulus(self) -> float:
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))


@dataclass(frozen=True)
class SectionGeometry:
    radius: float = 0.1
    length: float = 0.05
    microsolids: int = 41

    def __post_init__(self):
        if self.radius <= 0 or self.length < 0:
            raise ValueError("radius must be positive and length non-negative")
        if self.microsolids < 1:
            raise ValueError("microsolids must be a positive integer")

    @property
    def area(self) -> float:
        return np.pi * self.radius**2

    @property
    def bending_inertia(self) -> float:
        return np.pi * self.radius**4 / 4.0

    @property
    def polar_inertia(self) -> float:
        return np.pi * self.radius**4 / 2.0


@dataclass(frozen=True)
class Medium:
    kind: Literal["air", "water"] = "air"
    fluid_density: float = 0.0
    drag_coefficient: float = 0.0
    added_mass_factor: float = 0.0

    def __post_init__(self):
        if self.kind not in ("air", "water"):
            raise ValueError(f"unknown medium kind {self.kind!r}")
        if self.fluid_density < 0:
            raise ValueError("fluid_density must be non-negative")
        if self.kind == "air" and (self.fluid_density or self.drag_coefficient or self.added_mass_factor):
            raise ValueError("air medium carries no fluid density, drag or added mass")

    @classmethod
    def air(cls) -> "Medium":
        return cls("air")

    @classmethod
    def water(cls, fluid_density=WATER_DENSITY, drag_coefficient=0.82, added_mass_factor=1.0) -> "Medium":
        return cls("water", fluid_density, drag_coefficient, added_mass_factor)


@dataclass(frozen=True)
class ScrewTensors:
    """Per-unit-length screw tensors of one section; all diagonal 6x6."""

    inertia: np.ndarray
    added_mass: np.ndarray
    stiffness: np.ndarray
    viscosity: np.ndarray
    drag: np.ndarray

    @property
    def total_inertia(self) -> np.ndarray:
        return self.inertia + self.added_mass


def build_screw_tensors(geom: SectionGeometry, mat: MaterialParams, med: Medium) -> ScrewTensors:
    A, Ib, Ip = geom.area, geom.bending_inertia, geom.polar_inertia
    E, G, mu = mat.youngs_modulus, mat.shear_modulus, mat.shear_viscosity
    inertia = mat.density * np.diag([Ip, Ib, Ib, A, A, A])
    stiffness = np.diag([G * Ip, E * Ib, E * Ib, E * A, G * A, G * A])
    viscosity = mu * np.diag([Ip, 3 * Ib, 3 * Ib, 3 * A, A, A])
    added = med.added_mass_factor * med.fluid_density * np.diag([0, 0, 0, 0, A, A])
    # lateral cylinder drag per unit length on the two transverse axes
    d = 0.5 * med.fluid_density * med.drag_coefficient * 2 * geom.radius
    drag = np.diag([0, 0, 0, 0, d, d])
    return ScrewTensors(inertia, added, stiffness, viscosity, drag)


@dataclass(frozen=True, eq=False)
class RodSpec:
    sections: tuple[SectionGeometry, ...]
    material: MaterialParams = field(default_factory=MaterialParams)
    medium: Medium = field(default_factory=Medium.air)
    base_transform: np.ndarray = field(default_factory=default_base_transform)
    cable_point: float | None = None
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        if not self.sections:
            raise ValueError("a rod needs at least one section")
        if self.cable_point is not None and not 0 <= self.cable_point <= self.length + 1e-15:
            raise ValueError(f"cable_point {self.cable_point} outside [0, {self.length}]")

    @classmethod
    def uniform(cls, n_sections=4, length=0.2, radius=0.1, microsolids=41, **kwargs) -> "RodSpec":
        geom = SectionGeometry(radius, length / n_sections, microsolids)
        return cls(sections=(geom,) * n_sections, **kwargs)

    @property
    def n_sections(self) -> int:
        return len(self.sections)

    @property
    def dof(self) -> int:
        return 6 * self.n_sections

    @property
    def length(self) -> float:
        return float(sum(s.length for s in self.sections))

    @property
    def actuation_point(self) -> float:
        return self.length if self.cable_point is None else float(self.cable_point)

    @property
    def boundaries(self) -> np.ndarray:
        """Section end abscissae [X_0=0, X_1, ..., X_N]."""
        return np.concatenate([[0.0], np.cumsum([s.length for s in self.sections])])

    def tensors(self) -> list[ScrewTensors]:
        return [build_screw_tensors(s, self.material, self.medium) for s in self.sections]

    @property
    def buoyancy_factor(self) -> float:
        return 1.0 - self.medium.fluid_density / self.material.density


@dataclass(frozen=True)
class MicrosolidGrid:
    abscissae: np.ndarray  # X_k
    weights: np.ndarray  # w_k, summing to each section's length
    section: np.ndarray  # section index of each node
    local: np.ndarray  # X_k minus the start of its section


def discretize(rod: RodSpec) -> MicrosolidGrid:
    """Midpoint-rule nodes, one per microsolid."""
    if any(g.microsolids < 2 for g in rod.sections):
        raise ValueError("each section needs at least 2 microsolids")
    X, w, sec, loc = [], [], [], []
    for i, (start, geom) in enumerate(zip(rod.boundaries[:-1], rod.sections)):
        n = geom.microsolids
        h = geom.length / n
        x = (np.arange(n) + 0.5) * h
        X.append(start + x)
        loc.append(x)
        w.append(np.full(n, h))
        sec.append(np.full(n, i))
    return MicrosolidGrid(np.concatenate(X), np.concatenate(w), np.concatenate(sec), np.concatenate(loc))
