import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosserat_pcs.rod import (
    MaterialParams,
    Medium,
    RodSpec,
    SectionGeometry,
    build_screw_tensors,
    discretize,
)


def test_inertia_of_default_section():
    t = build_screw_tensors(SectionGeometry(0.1, 0.05, 41), MaterialParams(), Medium.air())
    a = np.pi * 1e-4
    assert np.allclose(t.inertia, 2000 * np.diag([a / 2, a / 4, a / 4, np.pi * 1e-2, np.pi * 1e-2, np.pi * 1e-2]), rtol=1e-15)


def test_stiffness_and_viscosity_structure():
    geom, mat = SectionGeometry(0.1, 0.05, 41), MaterialParams()
    t = build_screw_tensors(geom, mat, Medium.air())
    G = 110e3 / (2 * 1.45)
    A, Ib = np.pi * 0.01, np.pi * 1e-4 / 4
    assert np.allclose(np.diag(t.stiffness), [G * 2 * Ib, 110e3 * Ib, 110e3 * Ib, 110e3 * A, G * A, G * A])
    assert np.allclose(np.diag(t.viscosity), 3e3 * np.array([2 * Ib, 3 * Ib, 3 * Ib, 3 * A, A, A]))
    inviscid = build_screw_tensors(geom, MaterialParams(shear_viscosity=0.0), Medium.air())
    assert not inviscid.viscosity.any()


def test_air_has_no_added_mass_or_drag():
    t = build_screw_tensors(SectionGeometry(), MaterialParams(), Medium.air())
    assert not t.added_mass.any() and not t.drag.any()


def test_water_added_mass_and_drag():
    t = build_screw_tensors(SectionGeometry(0.1, 0.05, 41), MaterialParams(), Medium.water())
    A = np.pi * 0.01
    assert np.allclose(np.diag(t.added_mass), [0, 0, 0, 0, 997 * A, 997 * A])
    d = 0.5 * 997 * 0.82 * 0.2
    assert np.allclose(np.diag(t.drag), [0, 0, 0, 0, d, d])


@given(st.floats(1e-3, 1), st.floats(1e3, 1e7), st.floats(0.01, 0.49), st.floats(100, 5000))
@settings(max_examples=100, deadline=None)
def test_tensor_invariants(r, E, nu, rho):
    t = build_screw_tensors(SectionGeometry(r, 0.05, 5), MaterialParams(E, 1e3, nu, rho), Medium.water())
    for m in (t.inertia, t.added_mass, t.stiffness, t.viscosity, t.drag):
        assert np.array_equal(m, np.diag(np.diag(m)))
    assert np.all(np.diag(t.inertia) > 0) and np.all(np.diag(t.stiffness) > 0)
    assert np.all(np.diag(t.viscosity) >= 0) and np.all(np.diag(t.drag) >= 0)
    # G I_x = E I_y / (1 + nu) for a circular section
    assert t.stiffness[0, 0] < t.stiffness[1, 1] and t.stiffness[4, 4] < t.stiffness[3, 3]


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        MaterialParams(youngs_modulus=0)
    with pytest.raises(ValueError):
        MaterialParams(poisson_ratio=0.5)
    with pytest.raises(ValueError):
        SectionGeometry(radius=0)
    with pytest.raises(ValueError):
        Medium("air", 997.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        RodSpec.uniform(cable_point=0.3)


def test_midpoint_grid_single_section():
    g = discretize(RodSpec.uniform(n_sections=1, microsolids=2))
    assert np.allclose(g.abscissae, [0.05, 0.15]) and np.allclose(g.weights, [0.1, 0.1])


def test_default_grid():
    rod = RodSpec.uniform()
    g = discretize(rod)
    assert len(g.abscissae) == 164
    assert np.all(np.diff(g.abscissae) > 0) and 0 < g.abscissae[0] and g.abscissae[-1] < 0.2
    for s in range(4):
        assert abs(g.weights[g.section == s].sum() - 0.05) < 1e-15
    assert abs(g.weights.sum() - 0.2) < 1e-15


def test_tapered_rod():
    secs = [SectionGeometry(r, 0.05, 5) for r in (0.1, 0.08, 0.06)]
    rod = RodSpec(secs)
    t = rod.tensors()
    assert t[0].inertia[3, 3] > t[1].inertia[3, 3] > t[2].inertia[3, 3]
    assert rod.length == pytest.approx(0.15)
    assert rod.actuation_point == pytest.approx(0.15)


def test_buoyancy_factor():
    assert RodSpec.uniform(medium=Medium.water()).buoyancy_factor == pytest.approx(1 - 997 / 2000)
    assert RodSpec.uniform().buoyancy_factor == 1.0
