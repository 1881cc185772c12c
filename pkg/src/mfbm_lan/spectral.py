"""Fractional Gaussian noise: autocovariance, spectral density and H-derivatives.

Conventions
-----------
The spectral density ``f_H`` is normalized so that

    rho_H(k) = (1/2pi) int_{-pi}^{pi} f_H(lambda) e^{ik lambda} d lambda,

i.e. ``(1/2pi) int f_H = 1``.  With this normalization

    f_H(lambda) = K_H (1 - cos lambda) (|lambda|^{-2H-1} + B(lambda, H)),
    K_H = 2 Gamma(2H+1) sin(pi H) = 4 pi c_H,

and ``f_H(lambda) |lambda|^{2H-1} -> 2 pi c_H`` as ``lambda -> 0``, where
``c_H = Gamma(2H+1) sin(pi H) / (2 pi)``.  ``density_amplitude`` returns this
low-frequency amplitude; ``fh_constants`` returns ``c_H`` itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import digamma, gammaln

from .errors import DomainError, ParameterError, RegimeError

TWO_PI = 2.0 * np.pi

# explicit terms j = 1.._SERIES_TERMS-1 of B(lambda, H); the rest is summed
# by Euler-Maclaurin with four derivative corrections
_SERIES_TERMS = 32
_EM_COEFFS = ((1, 1.0 / 12.0), (3, -1.0 / 720.0), (5, 1.0 / 30240.0), (7, -1.0 / 1209600.0))

# lags below this use the textbook second difference; above it a
# cancellation-free rewrite
_STABLE_LAG = 2


class Regime(str, Enum):
    """Hurst regimes of the mixed model; the boundaries 1/2 and 3/4 are excluded."""

    SUPERCRITICAL = "supercritical"  # 3/4 < H < 1
    SUBCRITICAL = "subcritical"  # 1/2 < H < 3/4
    FBM_DOMINATED = "fbm_dominated"  # 0 < H < 1/2


def regime_of(H) -> Regime:
    H = _hurst(H)
    if H == 0.5 or H == 0.75:
        raise RegimeError(f"H = {H} is a regime boundary; no limit theory applies")
    if H > 0.75:
        return Regime.SUPERCRITICAL
    if H > 0.5:
        return Regime.SUBCRITICAL
    return Regime.FBM_DOMINATED


@dataclass(frozen=True)
class HurstIndex:
    """Hurst index ``H`` in (0, 1) with memory exponent ``p = 2H - 1``."""

    H: float

    def __post_init__(self):
        H = float(self.H)
        if not 0.0 < H < 1.0 or not np.isfinite(H):
            raise ParameterError(f"Hurst index must lie in (0, 1), got {self.H!r}")
        object.__setattr__(self, "H", H)

    @property
    def p(self) -> float:
        return 2.0 * self.H - 1.0

    @property
    def regime(self) -> Regime:
        return regime_of(self.H)

    def __float__(self) -> float:
        return self.H


@dataclass(frozen=True)
class SpectralConstants:
    c_H: float
    C_H: float
    truncation_terms: int


def _hurst(H) -> float:
    if isinstance(H, HurstIndex):
        return H.H
    return HurstIndex(H).H


# ---------------------------------------------------------------------------
# autocovariance
# ---------------------------------------------------------------------------

def _stable_parts(k: np.ndarray, H: float):
    # rho(k) = k^{2H} G(H, k) with G = expm1(m) + e^m 2 sinh^2(d/2),
    # m = H log(1 - 1/k^2), d = 2H atanh(1/k); no cancellation for large k
    mu = np.log1p(-1.0 / k**2)
    delta = 2.0 * np.arctanh(1.0 / k)
    m = H * mu
    d = H * delta
    em = np.exp(m)
    G = np.expm1(m) + em * 2.0 * np.sinh(0.5 * d) ** 2
    dG = em * (mu * np.cosh(d) + delta * np.sinh(d))
    return G, dG


def autocov(H, k) -> np.ndarray | float:
    """Autocovariance of standard fGn, ``rho_H(k)``; even in ``k``."""
    H = _hurst(H)
    k_arr = np.abs(np.asarray(k, dtype=float))
    out = np.empty_like(k_arr)
    small = k_arr < _STABLE_LAG
    ks = k_arr[small]
    out[small] = 0.5 * ((ks + 1) ** (2 * H) - 2 * ks ** (2 * H) + np.abs(ks - 1) ** (2 * H))
    kl = k_arr[~small]
    if kl.size:
        G, _ = _stable_parts(kl, H)
        out[~small] = kl ** (2 * H) * G
    return out if np.ndim(k) else float(out)


def _xlogx_pow(x: np.ndarray, H: float) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] ** (2 * H) * np.log(x[pos])
    return out


def autocov_dH(H, k) -> np.ndarray | float:
    """``d rho_H(k) / dH`` with the convention ``0 ln 0 = 0``."""
    H = _hurst(H)
    k_arr = np.abs(np.asarray(k, dtype=float))
    out = np.empty_like(k_arr)
    small = k_arr < _STABLE_LAG
    ks = k_arr[small]
    out[small] = _xlogx_pow(ks + 1, H) - 2 * _xlogx_pow(ks, H) + _xlogx_pow(np.abs(ks - 1), H)
    kl = k_arr[~small]
    if kl.size:
        G, dG = _stable_parts(kl, H)
        out[~small] = kl ** (2 * H) * (2.0 * np.log(kl) * G + dG)
    return out if np.ndim(k) else float(out)


# ---------------------------------------------------------------------------
# the periodization series B(lambda, H) and its H-derivative
# ---------------------------------------------------------------------------

def _falling(s: float, m: int) -> tuple[float, float]:
    """``P_m(s) = prod_{i<m} (-s-i)`` and ``P_m'(s)``."""
    P = 1.0
    dlog = 0.0
    for i in range(m):
        P *= -s - i
        dlog += 1.0 / (s + i)
    return P, P * dlog


def _em_tail(x0: np.ndarray, s: float, with_log: bool) -> np.ndarray:
    """Euler-Maclaurin sum of ``phi(2 pi j + b)`` over ``j >= J`` where
    ``x0 = 2 pi J + b`` and ``phi(x) = x^-s`` (or ``x^-s ln x``)."""
    a = TWO_PI
    lx = np.log(x0)
    base = x0 ** (1.0 - s)
    if with_log:
        integral = base * (lx / (s - 1.0) + 1.0 / (s - 1.0) ** 2) / a
        total = integral + 0.5 * x0**-s * lx
    else:
        integral = base / (a * (s - 1.0))
        total = integral + 0.5 * x0**-s
    for m, coef in _EM_COEFFS:
        P, dP = _falling(s, m)
        xm = x0 ** (-s - m)
        deriv = (-dP + P * lx) * xm if with_log else P * xm
        total = total - coef * a**m * deriv
    return total


def _periodization(lam: np.ndarray, H: float) -> tuple[np.ndarray, np.ndarray]:
    """``B(lambda, H)`` and ``S1 = sum (2 pi j +- lambda)^{-2H-1} ln(2 pi j +- lambda)``.

    ``dB/dH = -2 S1``.
    """
    s = 2.0 * H + 1.0
    j = np.arange(1, _SERIES_TERMS, dtype=float)
    lam = np.asarray(lam, dtype=float)
    xp = TWO_PI * j[None, :] + lam[:, None]
    xm = TWO_PI * j[None, :] - lam[:, None]
    lp, lm = np.log(xp), np.log(xm)
    tp, tm = np.exp(-s * lp), np.exp(-s * lm)
    B = np.sum(tp + tm, axis=1)
    S1 = np.sum(tp * lp + tm * lm, axis=1)
    x0p = TWO_PI * _SERIES_TERMS + lam
    x0m = TWO_PI * _SERIES_TERMS - lam
    B += _em_tail(x0p, s, False) + _em_tail(x0m, s, False)
    S1 += _em_tail(x0p, s, True) + _em_tail(x0m, s, True)
    return B, S1


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def fh_constants(H) -> SpectralConstants:
    """``c_H = Gamma(2H+1) sin(pi H)/(2 pi)`` and ``C_H = d ln c_H / dH``."""
    H = _hurst(H)
    c = np.exp(gammaln(2 * H + 1)) * np.sin(np.pi * H) / TWO_PI
    C = 2.0 * digamma(2 * H + 1) + np.pi / np.tan(np.pi * H)
    return SpectralConstants(c_H=float(c), C_H=float(C), truncation_terms=_SERIES_TERMS)


def density_amplitude(H) -> float:
    """Low-frequency amplitude of ``f_H``: ``lim f_H(lambda) |lambda|^p``."""
    return TWO_PI * fh_constants(H).c_H


def _check_lambda(lam) -> np.ndarray:
    arr = np.asarray(lam, dtype=float)
    if np.any(arr == 0.0) or np.any(np.abs(arr) > np.pi) or not np.all(np.isfinite(arr)):
        raise DomainError("lambda must satisfy 0 < |lambda| <= pi")
    return arr


def _core(H: float, lam: np.ndarray):
    """Shared pieces: prefactor ``K_H 2 sin^2(l/2)``, bracket and its H-derivative."""
    a = np.abs(lam).ravel()
    B, S1 = _periodization(a, H)
    s = 2.0 * H + 1.0
    la = np.log(a)
    pw = np.exp(-s * la)
    bracket = pw + B
    dbracket = -2.0 * (la * pw + S1)
    K = 2.0 * np.exp(gammaln(2 * H + 1)) * np.sin(np.pi * H)
    pref = K * 2.0 * np.sin(0.5 * a) ** 2
    return pref, bracket, dbracket


def density(H, lam):
    """Spectral density ``f_H(lambda)`` on ``0 < |lambda| <= pi``."""
    H = _hurst(H)
    arr = _check_lambda(lam)
    pref, bracket, _ = _core(H, arr)
    out = (pref * bracket).reshape(arr.shape)
    return out if arr.ndim else float(out)


def log_deriv(H, lam):
    """``b_H(lambda) = d log f_H(lambda) / dH``."""
    H = _hurst(H)
    arr = _check_lambda(lam)
    _, bracket, dbracket = _core(H, arr)
    out = (fh_constants(H).C_H + dbracket / bracket).reshape(arr.shape)
    return out if arr.ndim else float(out)


def density_dH(H, lam):
    """``d f_H(lambda) / dH`` from termwise differentiation of the series."""
    H = _hurst(H)
    arr = _check_lambda(lam)
    pref, bracket, dbracket = _core(H, arr)
    C = fh_constants(H).C_H
    out = (pref * (C * bracket + dbracket)).reshape(arr.shape)
    return out if arr.ndim else float(out)


def density_and_dH(H, lam) -> tuple[np.ndarray, np.ndarray]:
    """``(f_H, df_H/dH)`` from one series evaluation (used by quadratures)."""
    H = _hurst(H)
    arr = _check_lambda(lam)
    pref, bracket, dbracket = _core(H, arr)
    C = fh_constants(H).C_H
    f = pref * bracket
    return f.reshape(arr.shape), (pref * (C * bracket + dbracket)).reshape(arr.shape)
