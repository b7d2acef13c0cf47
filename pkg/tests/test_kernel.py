import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from shelab.errors import DomainError
from shelab.kernel import (
    InitialData,
    convolve_initial,
    heat_kernel,
    log_heat_kernel,
    product_identity_residual,
    squared_identity_residual,
    squared_kernel_mass,
    squared_kernel_mass_quadrature,
)


def test_heat_kernel_at_origin():
    assert heat_kernel(1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


def test_heat_kernel_against_mpmath():
    # exp(-1) / sqrt(pi), evaluated at 30 digits
    mpmath.mp.dps = 30
    ref = float(mpmath.exp(-1) / mpmath.sqrt(mpmath.pi))
    assert ref == pytest.approx(0.2075537487102974, rel=1e-15)
    assert heat_kernel(0.5, 1.0) == pytest.approx(ref, rel=1e-14)


@given(st.floats(1e-3, 1e3), st.floats(-50, 50))
def test_heat_kernel_even(r, z):
    assert heat_kernel(r, z) == heat_kernel(r, -z)


@pytest.mark.parametrize("r", [0.0, -1.0])
def test_heat_kernel_rejects_nonpositive_time(r):
    with pytest.raises(DomainError):
        heat_kernel(r, 0.0)


def test_log_kernel_survives_far_tail():
    # p_1(60) underflows to 0 but its log is exact
    assert heat_kernel(1.0, 60.0) == 0.0
    assert log_heat_kernel(1.0, 60.0) == pytest.approx(-1800 - 0.5 * math.log(2 * math.pi))


@pytest.mark.parametrize("r", [0.01, 1.0, 100.0])
def test_unit_mass(r):
    h = 8 * math.sqrt(r)
    mass, _ = integrate.quad(lambda y: heat_kernel(r, y), -h, h, epsabs=0, epsrel=1e-13)
    assert abs(mass - 1) <= 1e-10


@pytest.mark.parametrize("t,s,x", [(1.0, 0.3, 0.0), (2.0, 1.5, 0.7), (0.5, 0.1, -1.2)])
def test_semigroup(t, s, x):
    h = 8 * math.sqrt(t)
    val, _ = integrate.quad(lambda y: heat_kernel(t - s, x - y) * heat_kernel(s, y),
                            -h + x, h + x, epsabs=0, epsrel=1e-12)
    assert abs(val - heat_kernel(t, x)) <= 1e-8


def test_convolve_constant():
    assert convolve_initial(InitialData.constant(2.5), 0.7, 3.0) == 2.5


@pytest.mark.parametrize("x,expected", [(0.0, 0.5), (1.0, 0.8413447460685429)])
def test_convolve_step(x, expected):
    # expected: Phi(x) from the error function
    assert expected == pytest.approx(0.5 * (1 + math.erf(x / math.sqrt(2))), rel=1e-15)
    assert convolve_initial(InitialData.step(), 1.0, x) == pytest.approx(expected, abs=1e-10)


def test_convolve_callable():
    val = convolve_initial(lambda y: np.cos(y), 0.5, 0.0)
    # E cos(B_t) = exp(-t/2)
    assert val == pytest.approx(math.exp(-0.25), rel=1e-9)


def test_product_identity_examples():
    assert product_identity_residual(2, 1, 1, 0.5, 0) <= 1e-12
    assert product_identity_residual(1, 1 - 1e-6, 0.3, 0.3, 0.0) <= 1e-12
    assert product_identity_residual(1, 0.5, 0, 0, 0) <= 1e-12


def test_product_identity_requires_ordering():
    with pytest.raises(DomainError):
        product_identity_residual(1, 1, 0, 0, 0)


def test_squared_mass_values():
    assert squared_kernel_mass(1, 1) == pytest.approx(0.5641895835477563, rel=1e-15)
    assert squared_kernel_mass(4, 4) == pytest.approx(1.1283791670955126, rel=1e-15)
    assert squared_kernel_mass(1, 1e-12) < 1e-12


def test_squared_mass_quadrature_agrees():
    assert abs(squared_kernel_mass_quadrature(1, 1) - 0.5641895835) <= 1e-6
    assert squared_kernel_mass_quadrature(2, 0.5) == pytest.approx(
        squared_kernel_mass(2, 0.5), rel=1e-9)


@pytest.mark.parametrize("r", [0.0, 1.5])
def test_squared_mass_domain(r):
    with pytest.raises(DomainError):
        squared_kernel_mass(1, r)


@pytest.mark.parametrize("args", [(2, 1, 0, 0, 0), (1, 0.5, 0, 1, -1)])
def test_squared_identity_examples(args):
    assert squared_identity_residual(*args) <= 1e-8


def test_squared_identity_symmetric_in_x_z():
    a = squared_identity_residual(1.5, 0.8, 0.2, 0.4, -0.9)
    b = squared_identity_residual(1.5, 0.8, 0.2, -0.9, 0.4)
    assert abs(a - b) <= 1e-10


@given(st.floats(0.1, 10), st.floats(0.01, 0.99), st.floats(0, 0.99),
       st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_identity_residuals_property(t, frac, rfrac, x, y, z):
    s = t * frac
    assert product_identity_residual(t, s, x, y, z) <= 1e-12
    assert squared_identity_residual(t, s, s * rfrac, x, z) <= 1e-8
