"""Information constants and limiting Fisher information matrices.

Supercritical constants use the weight

    w(x) = (a_H |x|^-p / (1 + sigma^2 a_H |x|^-p))^2,   A = sigma^2 a_H,

with ``J_k = int_R w(x) (C_H - 2 ln|x|)^k dx``.  By default ``a_H = c_H``;
passing ``amplitude=density_amplitude(H)`` gives the constants that govern
the Toeplitz traces for the normalized density of :mod:`spectral`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .errors import DomainError, RegimeError
from .quadrature import graded_integral, halfline_integral
from .spectral import Regime, density_and_dH, fh_constants, log_deriv, regime_of
from .toeplitz import Theta

__all__ = [
    "Regime",
    "InfoConstants",
    "Normalization",
    "LimitInformation",
    "master_integral",
    "j_constants",
    "j_constants_oracle",
    "t_constants",
    "subcritical_integrals",
    "limit_information",
]


@dataclass(frozen=True)
class InfoConstants:
    J0: float
    J1: float
    J2: float
    Jperp: float
    m: float
    A: float
    L_A: float


class Normalization(str, Enum):
    SQRT_T = "sqrt_T"  # sqrt(n Delta)
    V_N = "v_n"  # sqrt(n) Delta^p
    SQRT_N = "sqrt_n"


@dataclass(frozen=True)
class LimitInformation:
    regime: Regime
    matrix: np.ndarray = field(repr=True)
    normalization: Normalization
    projection_required: bool

    def scale(self, n: int, Delta: float, p: float) -> float:
        """The scalar normalizing sequence at ``(n, Delta)``."""
        if self.normalization is Normalization.SQRT_T:
            return float(np.sqrt(n * Delta))
        if self.normalization is Normalization.V_N:
            return float(np.sqrt(n) * Delta**p)
        return float(np.sqrt(n))


def _supercritical(theta: Theta) -> None:
    if regime_of(theta.H) is not Regime.SUPERCRITICAL:
        raise RegimeError(f"H = {theta.H} is not in (3/4, 1)")


def master_integral(A: float, p: float, r: float) -> float:
    """``int_0^inf (A x^-p / (1 + A x^-p))^2 x^r dx`` in closed form."""
    if A <= 0 or not 0.5 < p < 1:
        raise DomainError(f"need A > 0 and 1/2 < p < 1, got A={A}, p={p}")
    q = (r + 1.0) / p
    if not 0.0 < q < 2.0:
        raise DomainError(f"(r+1)/p = {q} outside (0, 2)")
    return float(np.exp(q * np.log(A) + gammaln(q) + gammaln(2.0 - q)) / p)


def _amplitude_A(theta: Theta, amplitude: float | None) -> float:
    a = fh_constants(theta.H).c_H if amplitude is None else float(amplitude)
    return theta.sigma**2 * a


def j_constants(theta: Theta, amplitude: float | None = None) -> InfoConstants:
    """Closed forms of ``J0, J1, J2`` through gamma, digamma and trigamma."""
    _supercritical(theta)
    p = theta.p
    A = _amplitude_A(theta, amplitude)
    L_A = float(np.log(A))
    C = fh_constants(theta.H).C_H
    u, v = 1.0 / p, 2.0 - 1.0 / p
    # w = sigma^-4 (A x^-p / (1 + A x^-p))^2
    J0 = 2.0 * master_integral(A, p, 0.0) / theta.sigma**4
    q = C - (2.0 / p) * (L_A + digamma(u) - digamma(v))
    tri = (4.0 / p**2) * (polygamma(1, u) + polygamma(1, v))
    J1 = J0 * q
    J2 = J0 * (q * q + tri)
    return InfoConstants(
        J0=float(J0),
        J1=float(J1),
        J2=float(J2),
        Jperp=float(J2 - J1 * J1 / J0),
        m=float(J1 / J0),
        A=A,
        L_A=L_A,
    )


def jperp_trigamma(theta: Theta, amplitude: float | None = None) -> float:
    """``J0 (4/p^2)(psi1(1/p) + psi1(2 - 1/p))``, an independent path to ``Jperp``."""
    _supercritical(theta)
    p = theta.p
    J0 = 2.0 * master_integral(_amplitude_A(theta, amplitude), p, 0.0) / theta.sigma**4
    return float(J0 * (4.0 / p**2) * (polygamma(1, 1.0 / p) + polygamma(1, 2.0 - 1.0 / p)))


def _tail_moments(X: float, beta: float) -> tuple[float, float, float]:
    """``int_X^inf x^-beta (ln x)^j dx`` for ``j = 0, 1, 2`` (``beta > 1``)."""
    b = beta - 1.0
    lx = np.log(X)
    base = X**-b
    return (
        base / b,
        base * (lx / b + 1.0 / b**2),
        base * (lx * lx / b + 2.0 * lx / b**2 + 2.0 / b**3),
    )


def j_constants_oracle(
    theta: Theta, amplitude: float | None = None, *, u_cut: float = 1e-2, rtol: float = 1e-12
) -> InfoConstants:
    """``J0, J1, J2`` by direct quadrature of the defining integrals over R.

    The head ``(0, X]`` is integrated on dyadic Gauss-Legendre panels with
    ``A X^-p = u_cut``; beyond ``X`` the expansion
    ``w = a_H^2 x^-2p sum_i (-1)^i (i+1) (A x^-p)^i`` is integrated term by term.
    """
    _supercritical(theta)
    p = theta.p
    s2 = theta.sigma**2
    a = _amplitude_A(theta, amplitude) / s2
    A = s2 * a
    C = fh_constants(theta.H).C_H

    def weight(x):
        t = a * x**-p
        return (t / (1.0 + s2 * t)) ** 2

    X = (A / u_cut) ** (1.0 / p)
    heads = []
    for k in range(3):
        res = halfline_integral(
            lambda x, k=k: weight(x) * (C - 2.0 * np.log(x)) ** k, X, rtol=rtol
        )
        heads.append(res.value)

    tails = [0.0, 0.0, 0.0]
    for i in range(200):
        coef = (-1.0) ** i * (i + 1) * a * a * A**i
        beta = (i + 2) * p
        m0, m1, m2 = _tail_moments(X, beta)
        t0 = coef * m0
        t1 = coef * (C * m0 - 2.0 * m1)
        t2 = coef * (C * C * m0 - 4.0 * C * m1 + 4.0 * m2)
        tails[0] += t0
        tails[1] += t1
        tails[2] += t2
        if abs(t0) < 1e-17 * abs(tails[0]) and abs(t2) < 1e-17 * abs(tails[2]):
            break
    J0, J1, J2 = (2.0 * (h + t) for h, t in zip(heads, tails))
    return InfoConstants(
        J0=J0, J1=J1, J2=J2, Jperp=J2 - J1 * J1 / J0, m=J1 / J0, A=A, L_A=float(np.log(A))
    )


def t_constants(H, *, depth: int = 120) -> tuple[float, float]:
    """``T1 = (1/2pi) int b_H``, ``T2 = (1/4pi) int b_H^2`` over ``[-pi, pi]``."""
    if regime_of(H) is not Regime.FBM_DOMINATED:
        raise RegimeError(f"H = {float(H)} is not in (0, 1/2)")
    i1 = graded_integral(lambda lam: log_deriv(H, lam), depth=depth).value
    i2 = graded_integral(lambda lam: log_deriv(H, lam) ** 2, depth=depth).value
    # even integrands: int_{-pi}^{pi} = 2 int_0^pi
    return i1 / np.pi, i2 / (2.0 * np.pi)


def subcritical_integrals(H, *, depth: int = 120) -> tuple[float, float, float]:
    """``int_0^pi f^2``, ``int_0^pi f fdot`` and ``int_0^pi fdot^2``."""

    def f2(lam):
        f, _ = density_and_dH(H, lam)
        return f * f

    def ffd(lam):
        f, fd = density_and_dH(H, lam)
        return f * fd

    def fd2(lam):
        _, fd = density_and_dH(H, lam)
        return fd * fd

    return tuple(graded_integral(g, depth=depth).value for g in (f2, ffd, fd2))


def limit_information(theta: Theta, amplitude: float | None = None) -> LimitInformation:
    """Limiting covariance of the normalized score vector in the regime of ``theta``.

    ``amplitude`` only affects the supercritical constants (see module docstring).
    """
    regime = regime_of(theta.H)
    s = theta.sigma
    if regime is Regime.SUPERCRITICAL:
        J = j_constants(theta, amplitude)
        M = np.diag([s**2 * J.J0 / np.pi, s**4 * J.Jperp / (4.0 * np.pi)])
        return LimitInformation(regime, M, Normalization.SQRT_T, True)
    if regime is Regime.SUBCRITICAL:
        i_ff, i_fd, i_dd = subcritical_integrals(theta.H)
        off = s**3 * i_fd / np.pi
        M = np.array([[2.0 * s**2 * i_ff / np.pi, off], [off, s**4 * i_dd / (2.0 * np.pi)]])
        return LimitInformation(regime, M, Normalization.V_N, False)
    T1, T2 = t_constants(theta.H)
    M = np.array([[2.0 / s**2, T1 / s], [T1 / s, T2]])
    return LimitInformation(regime, M, Normalization.SQRT_N, False)
