from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from mfbm_lan.constants import (
    Normalization,
    j_constants,
    j_constants_oracle,
    jperp_trigamma,
    limit_information,
    master_integral,
    subcritical_integrals,
    t_constants,
)
from mfbm_lan.errors import DomainError, RegimeError
from mfbm_lan.spectral import Regime, density, density_amplitude, log_deriv
from mfbm_lan.toeplitz import Theta

super_H = st.floats(0.76, 0.98)
sigmas = st.floats(0.2, 5.0)


@pytest.mark.parametrize("A, p, r", [(0.3, 0.6, 0.0), (2.0, 0.8, 0.0), (1.0, 0.7, 0.3)])
def test_master_integral_quadrature(A, p, r):
    g = lambda x: (A * x**-p / (1 + A * x**-p)) ** 2 * x**r
    num = quad(g, 0, 1, limit=200)[0] + quad(g, 1, np.inf, limit=200)[0]
    assert master_integral(A, p, r) == pytest.approx(num, rel=1e-8)


@pytest.mark.parametrize("A, p, r", [(-1.0, 0.6, 0.0), (1.0, 0.4, 0.0), (1.0, 0.6, 0.5)])
def test_master_integral_domain(A, p, r):
    with pytest.raises(DomainError):
        master_integral(A, p, r)


def test_reference_values():
    J = j_constants(Theta.of(1.0, 0.8))
    assert J.J0 == pytest.approx(0.2820, abs=5e-5)
    assert J.Jperp == pytest.approx(34.1772, abs=5e-5)
    info = limit_information(Theta.of(1.0, 0.8))
    assert np.diag(info.matrix) == pytest.approx([0.0897, 2.7197], abs=5e-5)
    assert info.matrix[0, 1] == 0.0
    assert info.normalization is Normalization.SQRT_T
    assert info.projection_required


@pytest.mark.parametrize("H", [0.78, 0.8, 0.9, 0.95])
@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_closed_form_against_quadrature(H, sigma):
    th = Theta.of(sigma, H)
    J, O = j_constants(th), j_constants_oracle(th)
    for a, b in [(J.J0, O.J0), (J.J1, O.J1), (J.J2, O.J2), (J.Jperp, O.Jperp)]:
        assert a == pytest.approx(b, rel=1e-9)


def test_closed_form_with_spectral_amplitude():
    th = Theta.of(1.0, 0.8)
    amp = density_amplitude(0.8)
    J, O = j_constants(th, amp), j_constants_oracle(th, amp)
    assert J.Jperp == pytest.approx(O.Jperp, rel=1e-9)
    assert J.Jperp == pytest.approx(jperp_trigamma(th, amp), rel=1e-12)


@given(H=super_H, sigma=sigmas)
def test_projection_identities(H, sigma):
    th = Theta.of(sigma, H)
    J = j_constants(th)
    assert J.J0 > 0 and J.Jperp > 0
    assert J.J0 * J.J2 >= J.J1**2
    assert J.Jperp == pytest.approx(jperp_trigamma(th), rel=1e-10)
    assert J.m == pytest.approx(J.J1 / J.J0, rel=1e-14)


@pytest.mark.parametrize("H", [0.3, 0.6])
def test_supercritical_only(H):
    with pytest.raises(RegimeError):
        j_constants(Theta.of(1.0, H))


def test_subcritical_information():
    H = 0.6
    info = limit_information(Theta.of(1.0, H))
    assert info.regime is Regime.SUBCRITICAL
    assert info.normalization is Normalization.V_N
    i_ff = quad(lambda x: density(H, x) ** 2, 0, np.pi, limit=400, points=[1e-8, 1e-4])[0]
    assert subcritical_integrals(H)[0] == pytest.approx(i_ff, rel=1e-7)
    M = info.matrix
    assert M[0, 0] == pytest.approx(2 * i_ff / np.pi, rel=1e-7)
    assert np.allclose(M, M.T)
    assert np.all(np.linalg.eigvalsh(M) > 0)


def test_subcritical_sigma_scaling():
    a = limit_information(Theta.of(1.0, 0.6)).matrix
    b = limit_information(Theta.of(2.0, 0.6)).matrix
    assert b == pytest.approx(a * np.array([[4, 8], [8, 16]]), rel=1e-12)


def test_fbm_dominated_information():
    H = 0.3
    T1, T2 = t_constants(H)
    ref1 = quad(lambda x: log_deriv(H, x), 0, np.pi, limit=400, points=[1e-8, 1e-4])[0] / np.pi
    assert T1 == pytest.approx(ref1, rel=1e-7)
    assert T1 == pytest.approx(t_constants(H, depth=200)[0], rel=1e-12)
    assert T2 == pytest.approx(t_constants(H, depth=200)[1], rel=1e-12)
    M = limit_information(Theta.of(2.0, H)).matrix
    assert M == pytest.approx(np.array([[0.5, T1 / 2], [T1 / 2, T2]]), rel=1e-12)
    assert np.all(np.linalg.eigvalsh(M) > 0)
