import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given
from hypothesis import strategies as st

from coagtree.errors import DomainError, NoConvergence
from coagtree.exact import (
    BESSEL_SEAM,
    BernsteinFunction,
    additive_from_multiplicative,
    bessel_i1,
    bessel_i1e,
    burgers_characteristics,
    constant_kernel_solution,
    curve_to_csv,
    exponential_data,
    multiplicative_bessel,
    multiplicative_from_additive,
)
from coagtree.spectral import GridSpec

xi = exponential_data()


def dxi(s):
    return 1 / (1 + s) ** 2


def d2xi(s):
    return -2 / (1 + s) ** 3


def central(f, x, d, order=1):
    if order == 1:
        return (f(x - 2 * d) - 8 * f(x - d) + 8 * f(x + d) - f(x + 2 * d)) / (12 * d)
    return (-f(x - 2 * d) + 16 * f(x - d) - 30 * f(x) + 16 * f(x + d) - f(x + 2 * d)) / (12 * d * d)


def forward(f, d, order=1):
    c = {1: (-25 / 12, 4, -3, 4 / 3, -1 / 4), 2: (35 / 12, -26 / 3, 19 / 2, -14 / 3, 11 / 12)}[order]
    return sum(ck * f(k * d) for k, ck in enumerate(c)) / d**order


# ---- Bessel -------------------------------------------------------------------


def test_i1_against_scipy():
    z = np.concatenate([np.linspace(0, 60, 6001), [1e-8, 0.5, 19.99, 20.01, 150.0, 700.0]])
    pos = z > 0
    assert np.max(np.abs(bessel_i1e(z[pos]) / sp.ive(1, z[pos]) - 1)) <= 1e-12
    small = z[(z > 0) & (z < 300)]
    assert np.max(np.abs(bessel_i1(small) / sp.iv(1, small) - 1)) <= 1e-12


def test_i1_values():
    assert bessel_i1(1.0) == pytest.approx(0.565159103992485, rel=1e-14)
    assert bessel_i1(0.0) == 0.0
    assert bessel_i1(-2.0) == -bessel_i1(2.0)


def test_i1_seam_continuity():
    below, above = bessel_i1e(BESSEL_SEAM), bessel_i1e(np.nextafter(BESSEL_SEAM, 30.0))
    assert abs(below - above) <= 1e-12 * below


def test_bessel_density_examples():
    assert multiplicative_bessel(1.0, 0.25) == pytest.approx(0.323841588566108, rel=1e-12)
    assert multiplicative_bessel(1.0, 0.25) == pytest.approx(math.exp(-1.25) * bessel_i1(1.0) * 2, rel=1e-14)
    big = multiplicative_bessel(np.array([500.0, 5e4, 1e8]), 0.5)
    assert np.all(np.isfinite(big)) and big[-1] == 0.0


def test_bessel_small_time_limit(desk_grid):
    x = desk_grid.nodes
    for t in (0.0, 1e-24):
        g = multiplicative_bessel(x, t)
        assert np.max(np.abs(g * x * np.exp(x) - 1)) <= 1e-10


def test_bessel_mass_identity():
    # unit first moment; the (v+1)h nodes drop about h/2 * lim x g(x) = h/2, so use a fine grid
    grid = GridSpec(100.0, 2**16)
    x = grid.nodes
    for t in (0.1, 0.25, 0.5):
        assert grid.h * np.sum(x * multiplicative_bessel(x, t)) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("x,t", [(0.0, 0.5), (-1.0, 0.5), (1.0, -0.1), (1.0, 1.5)])
def test_bessel_domain(x, t):
    with pytest.raises(DomainError):
        multiplicative_bessel(x, t)


# ---- constant kernel ------------------------------------------------------------


def test_constant_kernel_examples():
    assert constant_kernel_solution(xi, 0)(0.7) == xi(0.7)
    assert constant_kernel_solution(xi, 2)(1e12) == pytest.approx(0.5)
    assert constant_kernel_solution(BernsteinFunction(lambda s: 0.0), 3)(2.0) == 0.0
    with pytest.raises(DomainError):
        constant_kernel_solution(xi, -1)


@pytest.mark.parametrize("s", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("t", [0.2, 1.0, 3.0])
def test_constant_kernel_equation(s, t):
    G = lambda tt: constant_kernel_solution(xi, tt)(s)
    assert abs(central(G, t, 1e-3) + 0.5 * G(t) ** 2) <= 1e-8


def test_bernstein_of_samples(desk_grid):
    x = desk_grid.nodes
    B = BernsteinFunction.of_samples(x, np.exp(-x), desk_grid.h)
    for s in (0.0, 0.5, 2.0):
        assert B(s) == pytest.approx(xi(s), abs=5e-3)
    assert B(0.0) == 0.0
    assert B.is_nondecreasing(np.linspace(0, 10, 50))


# ---- additive time change ----------------------------------------------------------


def G(s, tau):
    return burgers_characteristics(xi, tau, s)


def test_additive_map_examples():
    for s in (0.3, 2.0):
        assert additive_from_multiplicative(G, 0.0)(s) == G(s, 0.0)
    seen = []
    probe = lambda s, tau: seen.append(tau) or 1.0
    t = 1 - math.exp(-1)
    assert additive_from_multiplicative(probe, t)(0.5) == pytest.approx(math.e, rel=1e-14)
    assert seen[0] == pytest.approx(1.0, rel=1e-14)
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(DomainError):
            additive_from_multiplicative(G, bad)


@given(st.floats(0, 0.6), st.floats(0, 5))
def test_additive_map_roundtrip(tau, s):
    hstar = lambda ss, tt: additive_from_multiplicative(G, tt)(ss)
    back = multiplicative_from_additive(hstar, tau)(s)
    assert back == pytest.approx(G(s, tau), rel=1e-12, abs=1e-15)


# ---- Burgers characteristics ---------------------------------------------------------


def test_burgers_zero_time():
    assert burgers_characteristics(xi, 0.0, 1.3) == xi(1.3)


def test_burgers_taylor_coefficients():
    f = lambda t: burgers_characteristics(xi, t, 1.0)
    s = 1.0
    first = xi(s) * dxi(s)
    assert first == pytest.approx(1 / 8)
    assert abs(forward(f, 1e-3, 1) - first) <= 1e-6
    # (xi xi') xi' + xi (xi xi')'
    second = xi(s) * dxi(s) * dxi(s) + xi(s) * (dxi(s) ** 2 + xi(s) * d2xi(s))
    assert abs(forward(f, 1e-3, 2) - second) <= 1e-6


@pytest.mark.parametrize("t", [0.1, 0.3, 0.5])
@pytest.mark.parametrize("s", [0.2, 1.0, 4.0])
def test_burgers_pde_residual(t, s):
    Gt = central(lambda tt: burgers_characteristics(xi, tt, s), t, 1e-3)
    Gs = central(lambda ss: burgers_characteristics(xi, t, ss), s, 1e-3)
    assert abs(Gt - burgers_characteristics(xi, t, s) * Gs) <= 1e-6


def test_burgers_solves_fixed_point():
    t, s = 0.7, 2.0
    v = burgers_characteristics(xi, t, s, dxi=dxi)
    h = s + t * v
    assert xi(h) == pytest.approx(v, rel=1e-13)


def test_burgers_no_convergence_past_crossing():
    with pytest.raises(NoConvergence):
        burgers_characteristics(lambda s: s * s, 1.0, 5.0)


def test_curve_csv():
    text = curve_to_csv([1.0, 2.0], [0.5, 0.25])
    assert text == "x,value\n1.0,0.5\n2.0,0.25\n"
