import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from elasticflow import elliptic as ell


def quad_F(x, m):
    return quad(lambda t: 1.0 / np.sqrt(1.0 - m * np.sin(t) ** 2), 0.0, x, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def quad_E(x, m):
    return quad(lambda t: np.sqrt(1.0 - m * np.sin(t) ** 2), 0.0, x, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


M_GRID = [0.0, 0.05, 0.3, 0.5, 0.7312, 0.8261, 0.9, 0.99]


def test_K_E_at_zero():
    assert ell.complete_K(0.0) == pytest.approx(np.pi / 2, abs=1e-15)
    assert ell.complete_E(0.0) == pytest.approx(np.pi / 2, abs=1e-15)
    assert ell.complete_K(0.0) == ell.complete_E(0.0)


@pytest.mark.parametrize("m", M_GRID)
def test_complete_against_quadrature(m):
    assert abs(ell.complete_K(m) - quad_F(np.pi / 2, m)) < 1e-12
    assert abs(ell.complete_E(m) - quad_E(np.pi / 2, m)) < 1e-12


def test_complete_monotone_and_limits():
    assert ell.complete_K(0.999) > ell.complete_K(0.99)
    m = np.linspace(0.0, 0.999, 200)
    assert np.all(np.diff(ell.complete_K(m)) > 0)
    assert np.all(np.diff(ell.complete_E(m)) < 0)
    assert abs(ell.complete_E(1 - 1e-15) - 1.0) < 1e-6


@pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5, np.nan])
def test_domain_errors(bad):
    for fun in (ell.complete_K, ell.complete_E):
        with pytest.raises(ell.DomainError):
            fun(bad)
    for fun in (ell.incomplete_F, ell.incomplete_E, ell.am, ell.sn, ell.cn, ell.dn):
        with pytest.raises(ell.DomainError):
            fun(0.3, bad)


@pytest.mark.parametrize("x,m", [(1.0, 0.7312), (2.0, 0.5), (-0.7, 0.9), (5.3, 0.3), (1.2, 0.99), (-9.0, 0.8261)])
def test_incomplete_against_quadrature(x, m):
    assert abs(ell.incomplete_F(x, m) - quad_F(x, m)) < 1e-12 * max(1.0, abs(x))
    assert abs(ell.incomplete_E(x, m) - quad_E(x, m)) < 1e-12 * max(1.0, abs(x))


@pytest.mark.parametrize("m", M_GRID)
def test_special_values(m):
    assert ell.incomplete_F(np.pi / 2, m) == pytest.approx(ell.complete_K(m), abs=1e-13)
    assert ell.incomplete_E(np.pi / 2, m) == pytest.approx(ell.complete_E(m), abs=1e-13)
    assert ell.incomplete_F(0.0, m) == 0.0
    assert ell.incomplete_E(0.0, m) == 0.0
    assert ell.am(0.0, m) == 0.0
    assert ell.am(ell.complete_K(m), m) == pytest.approx(np.pi / 2, abs=1e-13)
    assert ell.ellipj(0.0, m)[:3] == (0.0, 1.0, 1.0)


@pytest.mark.parametrize("m", [0.1, 0.5, 0.7312, 0.8261, 0.95])
def test_quasi_periodicity(m):
    K, E = ell.complete_K(m), ell.complete_E(m)
    x = np.linspace(-1.4, 1.4, 11)
    u = np.linspace(-K, K, 11)
    for l in range(-3, 4):
        assert np.max(np.abs(ell.incomplete_F(x + l * np.pi, m) - ell.incomplete_F(x, m) - 2 * l * K)) < 1e-10
        assert np.max(np.abs(ell.incomplete_E(x + l * np.pi, m) - ell.incomplete_E(x, m) - 2 * l * E)) < 1e-10
        assert np.max(np.abs(ell.am(u + 2 * l * K, m) - ell.am(u, m) - l * np.pi)) < 1e-10
        assert ell.incomplete_F(l * np.pi / 2, m) == pytest.approx(l * K, abs=1e-10)
        assert ell.incomplete_E(l * np.pi / 2, m) == pytest.approx(l * E, abs=1e-10)
        assert ell.am(l * K, m) == pytest.approx(l * np.pi / 2, abs=1e-10)
    # periods of the Jacobi functions
    uu = np.linspace(-8, 8, 41)
    s0, c0, d0, _ = ell.ellipj(uu, m)
    s1, c1, _, _ = ell.ellipj(uu + 4 * K, m)
    _, _, d2, _ = ell.ellipj(uu + 2 * K, m)
    assert np.max(np.abs(s1 - s0)) < 1e-10
    assert np.max(np.abs(c1 - c0)) < 1e-10
    assert np.max(np.abs(d2 - d0)) < 1e-10


def test_odd_in_argument():
    x = np.linspace(0.1, 7.0, 23)
    for m in (0.2, 0.8):
        assert np.max(np.abs(ell.incomplete_F(-x, m) + ell.incomplete_F(x, m))) < 1e-14
        assert np.max(np.abs(ell.incomplete_E(-x, m) + ell.incomplete_E(x, m))) < 1e-14
        assert np.max(np.abs(ell.am(-x, m) + ell.am(x, m))) < 1e-14


def test_trigonometric_identities_on_grid():
    u, m = np.meshgrid(np.linspace(-8, 8, 81), np.linspace(0.05, 0.95, 19))
    s, c, d, _ = ell.ellipj(u, m)
    assert np.max(np.abs(s * s + c * c - 1.0)) < 1e-12
    assert np.max(np.abs(d * d + m * s * s - 1.0)) < 1e-12


def test_am_round_trip():
    rng = np.random.default_rng(0)
    u = rng.uniform(-10, 10, 200)
    m = rng.uniform(0.0, 0.99, 200)
    assert np.max(np.abs(ell.incomplete_F(ell.am(u, m), m) - u)) < 1e-10


@pytest.mark.parametrize("m", [0.2, 0.7312, 0.9])
def test_am_against_ode(m):
    # am' = sqrt(1 - m sin^2 am), am(0) = 0
    u = np.linspace(0.0, 10.0, 41)
    sol = solve_ivp(lambda t, y: np.sqrt(1.0 - m * np.sin(y) ** 2), (0, 10), [0.0], t_eval=u, rtol=1e-13, atol=1e-13, method="DOP853")
    assert np.max(np.abs(ell.am(u, m) - sol.y[0])) < 1e-10


def test_derivatives_in_u():
    h = 1e-5
    rng = np.random.default_rng(1)
    u = rng.uniform(-6, 6, 50)
    m = rng.uniform(0.05, 0.95, 50)
    sp, cp, dp, ap = ell.ellipj(u + h, m)
    sm, cm, dm, amm = ell.ellipj(u - h, m)
    s, c, d, _ = ell.ellipj(u, m)
    for fd, exact in (
        ((sp - sm) / (2 * h), c * d),
        ((cp - cm) / (2 * h), -s * d),
        ((dp - dm) / (2 * h), -m * s * c),
        ((ap - amm) / (2 * h), d),
    ):
        scale = np.maximum(np.abs(exact), 1e-2)
        assert np.max(np.abs(fd - exact) / scale) < 1e-6


def test_derivatives_in_x():
    h = 1e-5
    x = np.linspace(-5, 5, 31)
    for m in (0.3, 0.8):
        w = np.sqrt(1.0 - m * np.sin(x) ** 2)
        dF = (ell.incomplete_F(x + h, m) - ell.incomplete_F(x - h, m)) / (2 * h)
        dE = (ell.incomplete_E(x + h, m) - ell.incomplete_E(x - h, m)) / (2 * h)
        assert np.max(np.abs(dF * w - 1.0)) < 1e-6
        assert np.max(np.abs(dE / w - 1.0)) < 1e-6


def test_derivatives_in_m():
    h = 1e-6
    for m in np.linspace(0.05, 0.95, 19):
        K, E = ell.complete_K(m), ell.complete_E(m)
        dK = (ell.complete_K(m + h) - ell.complete_K(m - h)) / (2 * h)
        dE = (ell.complete_E(m + h) - ell.complete_E(m - h)) / (2 * h)
        dK_exact = (E - (1 - m) * K) / (2 * m * (1 - m))
        dE_exact = (E - K) / (2 * m)
        assert abs(dK / dK_exact - 1) < 1e-6
        assert abs(dE / dE_exact - 1) < 1e-6


def test_scalar_and_array_outputs():
    assert isinstance(ell.complete_K(0.5), float)
    assert isinstance(ell.incomplete_F(1.0, 0.5), float)
    assert isinstance(ell.sn(1.0, 0.5), float)
    out = ell.incomplete_E(np.array([0.1, 0.2]), 0.5)
    assert out.shape == (2,)
