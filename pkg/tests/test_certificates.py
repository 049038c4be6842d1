import numpy as np

from cosserat_pcs import certificates
from cosserat_pcs.rod import RodSpec


def test_random_configuration_ranges(rng):
    q = certificates.random_configuration(rng, 3).reshape(3, 6)
    assert np.all(np.abs(q[:, :3]) <= 4) and np.all(np.abs(q[:, 3] - 1) <= 0.2) and np.all(np.abs(q[:, 4:]) <= 0.2)


def test_quick_suites_pass():
    for name, n in (("spd", 5), ("bound", 50), ("skew", 3), ("linparam", 3), ("passivity", 50)):
        res = certificates.run(name, samples=n)[0]
        assert res.passed, res.line()
        assert res.line().startswith(f"PASS {name}:")


def test_seeded_reproducible():
    a = certificates.suite_bound(samples=20, seed=7)
    b = certificates.suite_bound(samples=20, seed=7)
    c = certificates.suite_bound(samples=20, seed=8)
    assert a.details == b.details and a.details != c.details


def test_energy_drift_short_run():
    rod = RodSpec.uniform(n_sections=2, microsolids=9)
    free = certificates.free_rod(rod)
    assert free.material.shear_viscosity == 0 and not free.gravity.any()
    rng = np.random.default_rng(1)
    q0 = np.tile([0, 0, 0, 1.0, 0, 0], 2) + 0.05 * rng.normal(size=12)
    drift, E, _ = certificates.energy_drift(free, q0, 0.1 * rng.normal(size=12), t_end=0.05, cadence=0.01)
    assert drift < 1e-6 and len(E) == 6


def test_failure_reports_offending_sample():
    res = certificates.suite_bound(samples=5, floor=1e9)
    assert not res.passed and "q" in res.offending and res.line().startswith("FAIL")
