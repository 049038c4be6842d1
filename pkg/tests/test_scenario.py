import numpy as np
import pytest

from cosserat_pcs import scenario
from cosserat_pcs.control import ControllerKind
from cosserat_pcs.errors import ScenarioError
from cosserat_pcs.rod import XI0


def test_defaults_fill_everything():
    doc = scenario.resolve({})
    assert doc["rod"] == {"sections": 4, "radius": 0.1, "length": 0.2, "microsolids": 41}
    assert doc["material"] == {"E": 110e3, "mu": 3e3, "poisson": 0.45, "rho": 2000.0}
    assert doc["medium"] == {"kind": "air", "rho_f": 0.0, "c_d": 0.0, "kappa": 0.0}
    assert doc["actuation"]["X_bar"] == 0.2
    assert doc["controller"]["kind"] == "pd_cable"
    assert doc["integrator"]["rel_tol"] == 1e-7 and doc["integrator"]["abs_tol"] == 1e-9
    assert doc["integrator"]["t_end"] == 60.0 and doc["integrator"]["cadence"] == 0.1
    assert np.allclose(np.ravel(doc["setpoint"]["q_d"]), np.tile(XI0, 4))


def test_water_defaults_and_fluid_kind():
    doc = scenario.resolve({"medium": {"kind": "water"}, "actuation": {"kind": "fluid"}})
    assert doc["medium"] == {"kind": "water", "rho_f": 997.0, "c_d": 0.82, "kappa": 1.0}
    assert doc["controller"]["kind"] == "pd_fluid"


def test_dump_roundtrip():
    raw = {
        "medium": {"kind": "water"},
        "controller": {"K_p": [1, 2, 3, 4, 5, 6], "K_I": 0.5, "kind": "pid_grav", "integral_bound": 2.0},
        "actuation": {"tip_load_N": 0.2, "tip_load_axis": [0, 1, 1]},
        "initial": {"state": "given", "q": list(np.tile(XI0, 4))},
    }
    doc = scenario.resolve(raw)
    again = scenario.load_text(scenario.dump(doc))
    assert again == doc
    assert scenario.load_text(scenario.dump(scenario.resolve({}))) == scenario.resolve({})


@pytest.mark.parametrize(
    "raw, key",
    [
        ({"rod": {"lenght": 0.2}}, "rod.lenght"),
        ({"solver": {}}, "solver"),
        ({"controller": {"Kp": 1.0}}, "controller.Kp"),
        ({"rod": {"sections": 0}}, "rod.sections"),
        ({"rod": {"microsolids": 1}}, "rod.microsolids"),
        ({"material": {"E": -1.0}}, "material.E"),
        ({"material": {"poisson": 0.5}}, "material.poisson"),
        ({"medium": {"kind": "oil"}}, "medium.kind"),
        ({"medium": {"rho_f": 997.0}}, "medium.rho_f"),
        ({"actuation": {"kind": "cable"}, "controller": {"kind": "pd_fluid"}}, "controller.kind"),
        ({"actuation": {"kind": "fluid"}, "controller": {"kind": "pd_cable"}}, "controller.kind"),
        ({"actuation": {"X_bar": 0.5}}, "actuation.X_bar"),
        ({"actuation": {"tip_load_axis": "w"}}, "actuation.tip_load_axis"),
        ({"controller": {"K_p": [1.0, 2.0]}}, "controller.K_p"),
        ({"controller": {"K_D": 0.0}}, "controller"),
        ({"controller": {"mode": "torque"}}, "controller.mode"),
        ({"controller": {"K_p": "big"}}, "controller.K_p"),
        ({"setpoint": {"q_d": "straight"}}, "setpoint.q_d"),
        ({"setpoint": {"q_d": [1.0, 2.0]}}, "setpoint.q_d"),
        ({"initial": {"state": "given"}}, "initial.q"),
        ({"initial": {"q": [0.0]}}, "initial.q"),
        ({"integrator": {"t_end": 1.0, "cadence": 0.3}}, "integrator.cadence"),
        ({"integrator": {"h_min": 1.0}}, "integrator"),
        ({"integrator": {"rel_tol": True}}, "integrator.rel_tol"),
        ({"output": {"window": 100.0}}, "output.window"),
        ({"output": {"plot_coordinate": 7}}, "output.plot_coordinate"),
        ({"output": {"csv_path": 3}}, "output.csv_path"),
    ],
)
def test_validation_names_the_key(raw, key):
    with pytest.raises(ScenarioError) as err:
        scenario.resolve(raw)
    assert str(err.value).startswith(key + ":")


def test_full_gain_matrix_must_be_diagonal():
    K = np.eye(24)
    K[0, 1] = K[1, 0] = 0.1
    with pytest.raises(ScenarioError, match="controller.K_p"):
        scenario.resolve({"controller": {"K_p": K.tolist()}})


def test_bad_toml(tmp_path):
    p = tmp_path / "x.toml"
    p.write_text("rod = [")
    with pytest.raises(ScenarioError):
        scenario.load(p)
    with pytest.raises(ScenarioError):
        scenario.load(tmp_path / "missing.toml")


def test_output_paths_default_to_stem(tmp_path):
    p = tmp_path / "demo.toml"
    p.write_text("[integrator]\nt_end = 1.0\n")
    doc = scenario.load(p)
    assert doc["output"]["csv_path"] == "demo.csv" and doc["output"]["plot_path"] == "demo.svg"


def test_build_experiment():
    doc = scenario.resolve(
        {
            "rod": {"sections": 2, "microsolids": 5},
            "medium": {"kind": "water"},
            "actuation": {"tip_load_N": 10.0, "tip_load_axis": "y", "X_bar": 0.15},
            "controller": {"kind": "pd_grav", "mode": "velocity"},
        }
    )
    ex = scenario.build(doc)
    assert ex.rod.n_sections == 2 and ex.rod.actuation_point == 0.15
    assert ex.rod.medium.fluid_density == 997.0
    assert ex.loop.kind is ControllerKind.PD_GRAV and ex.mode == "velocity"
    assert np.array_equal(ex.loop.tip_wrench, [0, 0, 0, 0, 10.0, 0])
    assert np.array_equal(ex.initial.q, np.tile(XI0, 2))


def test_loaded_equilibrium_start():
    doc = scenario.resolve({"rod": {"sections": 2, "microsolids": 5}, "initial": {"state": "loaded_equilibrium"}, "actuation": {"tip_load_N": 1.0}})
    ex = scenario.build(doc)
    assert np.abs(ex.initial.q - np.tile(XI0, 2)).max() > 1e-3
