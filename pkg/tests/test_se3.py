import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad_vec
from scipy.linalg import expm

from cosserat_pcs import se3
from cosserat_pcs.errors import NonSe3Matrix
from cosserat_pcs.rod import XI0, default_base_transform

from conftest import random_pose

twists = arrays(np.float64, 6, elements=st.floats(-3, 3))


def series_exp(v, ell, terms=20, squarings=3):
    """Truncated power series of exp, evaluated on A / 2^s and squared back.

    Without scaling, 20 terms leave a remainder near pi^20 / 20! ~ 4e-9 at
    |v| ell = pi, which is coarser than the tolerance under test.
    """
    A = se3.hat(v) * ell / 2**squarings
    out, term = np.eye(4), np.eye(4)
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def test_hat_vee_roundtrip(rng):
    v = rng.normal(size=(5, 6))
    assert np.allclose(se3.vee(se3.hat(v)), v)
    with pytest.raises(NonSe3Matrix):
        se3.vee(np.ones((4, 4)))


def test_exp_zero_arclen_is_identity(rng):
    assert np.array_equal(se3.exp_se3(rng.normal(size=6), 0.0), np.eye(4))


def test_exp_straight_rod():
    g = se3.exp_se3(XI0, 0.2)
    assert np.allclose(g[:3, :3], np.eye(3), atol=0)
    assert np.allclose(g[:3, 3], [0.2, 0, 0], atol=1e-17)


def test_exp_matches_series_oracle(rng):
    worst = 0.0
    for _ in range(1000):
        v = rng.normal(size=6)
        ell = rng.uniform(0, np.pi / np.linalg.norm(v))
        worst = max(worst, np.linalg.norm(se3.exp_se3(v, ell) - series_exp(v, ell)))
    assert worst < 1e-10


def test_unscaled_series_agrees_to_its_truncation_bound(rng):
    v = rng.normal(size=6)
    ell = np.pi / np.linalg.norm(v)
    err = np.linalg.norm(se3.exp_se3(v, ell) - series_exp(v, ell, squarings=0))
    assert err < 10 * np.pi**20 / 2.43e18


def test_exp_small_angle_branch_continuity():
    # both sides of the series switch agree with expm
    for phi in (1e-12, 1e-8, 0.19999, 0.2, 0.20001, 1.0):
        v = np.array([phi, 0, 0, 1.0, 0.5, 0.0])
        assert np.allclose(se3.exp_se3(v, 1.0), expm(se3.hat(v)), atol=1e-15, rtol=0)


@given(twists, st.floats(0, 1))
@settings(max_examples=200, deadline=None)
def test_exp_is_pose(v, ell):
    assert se3.is_pose(se3.exp_se3(v, ell))


def test_exp_negative_arclen_rejected():
    with pytest.raises(ValueError):
        se3.exp_se3(XI0, -1.0)


def test_adjoint_identity_and_base_transform():
    assert np.array_equal(se3.adjoint(np.eye(4)), np.eye(6))
    g_r = default_base_transform()
    Ad = se3.adjoint(g_r)
    R = g_r[:3, :3]
    assert np.array_equal(Ad[:3, :3], R) and np.array_equal(Ad[3:, 3:], R)
    assert np.array_equal(Ad[3:, :3], np.zeros((3, 3)))
    assert np.allclose(se3.adjoint_inv(g_r) @ Ad, np.eye(6), atol=1e-15)


def test_adjoint_homomorphism(rng):
    worst = 0.0
    for _ in range(500):
        a, b = random_pose(rng), random_pose(rng)
        worst = max(worst, np.linalg.norm(se3.adjoint(a @ b) - se3.adjoint(a) @ se3.adjoint(b)))
    assert worst < 1e-10


def test_adjoint_inv_product(rng):
    for _ in range(100):
        g = random_pose(rng)
        assert np.linalg.norm(se3.adjoint(g) @ se3.adjoint_inv(g) - np.eye(6)) < 1e-10


def test_ad_matches_bracket_and_fd(rng):
    assert np.array_equal(se3.ad(np.zeros(6)), np.zeros((6, 6)))
    for _ in range(20):
        v, w = rng.normal(size=6), rng.normal(size=6)
        bracket = se3.hat(v) @ se3.hat(w) - se3.hat(w) @ se3.hat(v)
        assert np.allclose(se3.hat(se3.ad(v) @ w), bracket, atol=1e-12)
        h = 1e-6
        fd = (se3.adjoint(se3.exp_se3(v, h)) - se3.adjoint(se3.inverse(se3.exp_se3(v, h)))) / (2 * h)
        assert np.allclose(fd, se3.ad(v), atol=1e-6)


@given(twists, twists)
@settings(max_examples=300, deadline=None)
def test_ad_antisymmetry(v, w):
    scale = 1 + np.abs(v).max() * np.abs(w).max()
    assert np.allclose(se3.ad(v) @ w, -se3.ad(w) @ v, atol=1e-12 * scale)
    assert np.allclose(se3.ad(v) @ v, 0, atol=1e-12 * (1 + np.abs(v).max() ** 2))


def test_coad_duality(rng):
    assert np.array_equal(se3.coad(XI0), se3.ad(XI0).T)
    for _ in range(100):
        v, u, w = rng.normal(size=(3, 6))
        assert np.isclose((se3.coad(v) @ w) @ u, w @ (se3.ad(v) @ u), atol=1e-12)


def quadrature_tangent(v, ell):
    f = lambda s: se3.adjoint_inv(se3.exp_se3(v, s))
    return quad_vec(f, 0, ell, epsabs=1e-14, epsrel=1e-13)[0]


def test_exp_tangent_zero_length(rng):
    assert np.array_equal(se3.exp_tangent(rng.normal(size=6), 0.0), np.zeros((6, 6)))


def test_exp_tangent_straight_rod_gauss_legendre():
    x, w = np.polynomial.legendre.leggauss(64)
    s = 0.1 * (x + 1)
    ref = 0.1 * sum(wi * se3.adjoint_inv(se3.exp_se3(XI0, si)) for wi, si in zip(w, s))
    assert np.abs(se3.exp_tangent(XI0, 0.2) - ref).max() < 1e-14


def test_exp_tangent_matches_quadrature(rng):
    for _ in range(30):
        v = rng.normal(size=6) * rng.choice([1e-9, 1e-3, 1.0, 5.0])
        ell = rng.uniform(0, 1)
        assert np.abs(se3.exp_tangent(v, ell) - quadrature_tangent(v, ell)).max() < 1e-8


def test_exp_tangent_is_body_differential(rng):
    # h^{-1} dh = hat(T dv) checked by a central difference of exp
    for _ in range(20):
        v, dv = rng.normal(size=(2, 6))
        ell, eps = rng.uniform(0.1, 1), 1e-6
        g = se3.exp_se3(v, ell)
        dg = (se3.exp_se3(v + eps * dv, ell) - se3.exp_se3(v - eps * dv, ell)) / (2 * eps)
        assert np.allclose(se3.vee(se3.inverse(g) @ dg, tol=1e-6), se3.exp_tangent(v, ell) @ dv, atol=1e-7)


def test_batched_matches_single(rng):
    v = rng.normal(size=(7, 6))
    ell = rng.uniform(0, 1, 7)
    G = se3.exp_se3(v, ell)
    T = se3.exp_tangent(v, ell)
    for k in range(7):
        assert np.array_equal(G[k], se3.exp_se3(v[k], ell[k]))
        assert np.allclose(T[k], se3.exp_tangent(v[k], ell[k]), rtol=0, atol=1e-15)


def test_log_inverts_exp(rng):
    for _ in range(20):
        v = rng.normal(size=6)
        v *= rng.uniform(0.1, 3) / np.linalg.norm(v[:3])
        assert np.allclose(se3.log_se3(se3.exp_se3(v)), v, atol=1e-8)
