"""Exact Gaussian log-likelihood, scores, rate matrices and the LAN check.

With ``y = A^-1 x`` the whitened quadratic forms are ``Z^T C Z = y^T T y / Delta``
and ``Z^T D Z = y^T Tdot y / Delta``, and

    S_sigma = (gamma/sigma) (Z^T C Z - tr C),
    R_H     = (gamma/2) (Z^T D Z - tr D),
    S_H     = (gamma/2) (Z^T (2 ln(Delta) C + D) Z - tr(2 ln(Delta) C + D)),
    R_perp  = R_H - (sigma a_n / 2) S_sigma.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .constants import LimitInformation, Normalization, j_constants
from .errors import ParameterError, RegimeError
from .spectral import HurstIndex, Regime
from .toeplitz import CovModel, Theta, build_model

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Normalizers:
    sqrtT: float
    L_n: float
    v_n: float
    sqrt_n: float


@dataclass(frozen=True)
class ScoreEval:
    S_sigma: float
    S_H: float
    R_H: float
    R_H_perp: float
    Xi: np.ndarray
    U: np.ndarray
    native: np.ndarray
    normalizers: Normalizers


@dataclass(frozen=True)
class ScoreBatch:
    """Per-column score quantities for an ``n x B`` block of paths."""

    S_sigma: np.ndarray
    S_H: np.ndarray
    R_H: np.ndarray
    R_H_perp: np.ndarray
    normalizers: Normalizers

    def Xi(self) -> np.ndarray:
        return np.column_stack((self.S_sigma, self.R_H_perp)) / self.normalizers.sqrtT

    def U(self) -> np.ndarray:
        s = self.normalizers.sqrtT
        return np.column_stack((self.S_sigma / s, self.R_H / (self.normalizers.L_n * s)))


class RateVariant(str, Enum):
    EMPIRICAL = "empirical"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class RateMatrices:
    M1: np.ndarray
    M2: np.ndarray
    M: np.ndarray
    a_n_used: float
    variant: RateVariant


@dataclass(frozen=True)
class LanCheck:
    h: np.ndarray
    theta_h: Theta
    llr_exact: float
    llr_predicted: float
    gap: float
    gap_finite_info: float
    h_in_regime: bool


def normalizers(model: CovModel) -> Normalizers:
    s = model.scheme
    return Normalizers(
        sqrtT=float(np.sqrt(s.horizon)),
        L_n=float(s.L),
        v_n=float(np.sqrt(s.n) * s.Delta**model.theta.p),
        sqrt_n=float(np.sqrt(s.n)),
    )


def _check_dim(model: CovModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != model.n:
        raise ParameterError(f"dimension mismatch: {x.shape[0]} != {model.n}")
    return x


def log_lik(model: CovModel, x: np.ndarray) -> float | np.ndarray:
    """Gaussian log-likelihood of increments ``x`` (vector or ``n x B`` block)."""
    x = _check_dim(model, x)
    n, Delta = model.n, model.Delta
    quad = np.sum(x * model.solve(x), axis=0) / Delta
    out = -0.5 * (n * LOG_2PI + n * np.log(Delta) + model.logdet_A) - 0.5 * quad
    return out if np.ndim(out) else float(out)


def score_batch(model: CovModel, x: np.ndarray) -> ScoreBatch:
    """Scores for each column of ``x``; the H-score uses its own kernel."""
    x = _check_dim(model, x)
    x2 = x.reshape(model.n, -1)
    tr = model.traces
    gamma, sigma, Delta = model.gamma, model.theta.sigma, model.Delta
    lnD = np.log(Delta)
    y = model.solve(x2)
    qC = np.sum(y * model.T.matvec(y), axis=0) / Delta
    qD = np.sum(y * model.Tdot.matvec(y), axis=0) / Delta
    kH = 2.0 * lnD * model.T.first_col + model.Tdot.first_col
    qH = np.sum(y * sla.matmul_toeplitz(kH, y, check_finite=False), axis=0) / Delta
    S_sigma = gamma / sigma * (qC - tr.trC)
    R_H = 0.5 * gamma * (qD - tr.trD)
    S_H = 0.5 * gamma * (qH - (2.0 * lnD * tr.trC + tr.trD))
    R_perp = R_H - 0.5 * sigma * tr.a_n * S_sigma
    return ScoreBatch(S_sigma, S_H, R_H, R_perp, normalizers(model))


def scores(model: CovModel, x: np.ndarray) -> ScoreEval:
    x = _check_dim(model, x)
    if x.ndim != 1:
        raise ParameterError("scores expects a single path; use score_batch for blocks")
    b = score_batch(model, x)
    nz = b.normalizers
    Xi = b.Xi()[0]
    U = b.U()[0]
    return ScoreEval(
        S_sigma=float(b.S_sigma[0]),
        S_H=float(b.S_H[0]),
        R_H=float(b.R_H[0]),
        R_H_perp=float(b.R_H_perp[0]),
        Xi=Xi,
        U=U,
        native=native_vector(model, b)[0],
        normalizers=nz,
    )


def native_vector(model: CovModel, batch: ScoreBatch) -> np.ndarray:
    """Normalized score vector in the regime of ``model.theta`` (``B x 2``)."""
    regime = model.theta.regime
    nz = batch.normalizers
    if regime is Regime.SUPERCRITICAL:
        return batch.Xi()
    scale = nz.v_n if regime is Regime.SUBCRITICAL else nz.sqrt_n
    return np.column_stack((batch.S_sigma, batch.R_H)) / scale


def exact_covariance(model: CovModel, vector: str = "native") -> np.ndarray:
    """Exact finite-n covariance of ``Xi``, ``U`` or the regime-native vector.

    Uses ``Cov(Z^T P Z, Z^T Q Z) = 2 tr(PQ)`` for standard Gaussian ``Z``.
    """
    tr = model.traces
    g, s = model.gamma, model.theta.sigma
    nz = normalizers(model)
    v_ss = 2.0 * (g / s) ** 2 * tr.trC2
    c_sr = g * g / s * tr.trCD
    v_rr = 0.5 * g * g * tr.trD2
    if vector == "Xi":
        return np.diag([v_ss, 0.5 * g * g * tr.trDperp2]) / nz.sqrtT**2
    if vector == "U":
        d = np.array([1.0, 1.0 / nz.L_n])
        return np.array([[v_ss, c_sr], [c_sr, v_rr]]) * np.outer(d, d) / nz.sqrtT**2
    if vector != "native":
        raise ParameterError(f"unknown vector {vector!r}")
    regime = model.theta.regime
    if regime is Regime.SUPERCRITICAL:
        return exact_covariance(model, "Xi")
    scale = nz.v_n if regime is Regime.SUBCRITICAL else nz.sqrt_n
    return np.array([[v_ss, c_sr], [c_sr, v_rr]]) / scale**2


def lower_rate_matrices(sigma: float, Delta: float, a_n: float | None) -> tuple:
    """``(M1, M2, M)``; ``a_n = None`` means no second projection."""
    M1 = np.array([[1.0, 0.0], [-sigma * np.log(Delta), 1.0]])
    M2 = np.eye(2) if a_n is None else np.array([[1.0, 0.0], [-0.5 * sigma * a_n, 1.0]])
    return M1, M2, M2 @ M1


def rate_matrices(model: CovModel, variant: str | RateVariant = RateVariant.EMPIRICAL) -> RateMatrices:
    variant = RateVariant(variant)
    theta = model.theta
    if theta.regime is not Regime.SUPERCRITICAL:
        if variant is RateVariant.DETERMINISTIC:
            raise RegimeError("the deterministic projection coefficient needs 3/4 < H < 1")
        M1, M2, M = lower_rate_matrices(theta.sigma, model.Delta, None)
        return RateMatrices(M1, M2, M, 0.0, variant)
    if variant is RateVariant.EMPIRICAL:
        a = model.traces.a_n
    else:
        a = 2.0 * model.scheme.L + j_constants(theta).m
    M1, M2, M = lower_rate_matrices(theta.sigma, model.Delta, a)
    return RateMatrices(M1, M2, M, float(a), variant)


def perturbed_theta(model: CovModel, h, rates: RateMatrices | None = None) -> tuple[Theta, bool]:
    """``theta + M^T h / sqrt(T)``; raises if it leaves ``sigma > 0, 0 < H < 1``."""
    h = np.asarray(h, dtype=float).reshape(2)
    rates = rate_matrices(model) if rates is None else rates
    delta = rates.M.T @ h / np.sqrt(model.scheme.horizon)
    sigma_h = model.theta.sigma + delta[0]
    H_h = model.theta.H + delta[1]
    if not sigma_h > 0.0 or not 0.0 < H_h < 1.0:
        raise ParameterError(f"perturbed parameter ({sigma_h:.6g}, {H_h:.6g}) is outside the space")
    in_regime = HurstIndex(H_h).H > 0.75
    return Theta(sigma_h, HurstIndex(H_h)), in_regime


def llr_representation(model: CovModel, model_h: CovModel, x: np.ndarray) -> float:
    """``-1/2 logdet(I+S) - 1/2 Z^T((I+S)^-1 - I) Z`` with ``S = L^-1 (A_h - A) L^-T``."""
    x = _check_dim(model, x)
    if model_h.scheme != model.scheme:
        raise ParameterError("models must share the sampling scheme")
    n = model.n
    L = model.chol_A
    Ah = model_h.gamma * model_h.T.dense()
    Ah[np.diag_indices(n)] += 1.0
    A = model.gamma * model.T.dense()
    A[np.diag_indices(n)] += 1.0
    S = sla.solve_triangular(L, Ah - A, lower=True)
    S = sla.solve_triangular(L, S.T, lower=True)
    S = 0.5 * (S + S.T)
    w, Q = np.linalg.eigh(S)
    z = Q.T @ model.whiten(x)
    return float(-0.5 * np.sum(np.log1p(w)) - 0.5 * np.sum(z * z * (1.0 / (1.0 + w) - 1.0)))


def lan_check_batch(
    model: CovModel,
    h,
    x: np.ndarray,
    info: LimitInformation,
    *,
    rates: RateMatrices | None = None,
) -> list[LanCheck]:
    """LAN check for each column of ``x`` with one rebuilt model at ``theta_h``."""
    if model.theta.regime is not Regime.SUPERCRITICAL or info.normalization is not Normalization.SQRT_T:
        raise RegimeError("the LAN check applies to the supercritical regime")
    x = _check_dim(model, x).reshape(model.n, -1)
    h = np.asarray(h, dtype=float).reshape(2)
    rates = rate_matrices(model) if rates is None else rates
    theta_h, in_regime = perturbed_theta(model, h, rates)
    model_h = build_model(theta_h, model.scheme)
    llr = log_lik(model_h, x) - log_lik(model, x)
    Xi = score_batch(model, x).Xi()
    lin = Xi @ h
    pred = lin - 0.5 * h @ info.matrix @ h
    pred_n = lin - 0.5 * h @ exact_covariance(model, "Xi") @ h
    llr = np.atleast_1d(llr)
    return [
        LanCheck(
            h=h,
            theta_h=theta_h,
            llr_exact=float(llr[j]),
            llr_predicted=float(pred[j]),
            gap=float(llr[j] - pred[j]),
            gap_finite_info=float(llr[j] - pred_n[j]),
            h_in_regime=in_regime,
        )
        for j in range(x.shape[1])
    ]


def lan_check(model: CovModel, h, x: np.ndarray, info: LimitInformation) -> LanCheck:
    x = _check_dim(model, x)
    if x.ndim != 1:
        raise ParameterError("lan_check expects a single path; use lan_check_batch")
    h = np.asarray(h, dtype=float).reshape(2)
    if not np.any(h):
        if model.theta.regime is not Regime.SUPERCRITICAL:
            raise RegimeError("the LAN check applies to the supercritical regime")
        return LanCheck(h, model.theta, 0.0, 0.0, 0.0, 0.0, True)
    return lan_check_batch(model, h, x, info)[0]
