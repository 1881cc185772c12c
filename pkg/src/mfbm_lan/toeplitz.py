"""Toeplitz covariance model ``A = I + gamma T`` with dense traces and norms.

Notation
--------
``T = T_n(H)`` is the fGn Toeplitz covariance, ``Tdot`` its entrywise
H-derivative, ``A = I + gamma T`` with Cholesky factor ``A = L L^T``.
``C = L^-1 T L^-T`` and ``D = L^-1 Tdot L^-T`` are symmetric and orthogonally
similar to ``A^-1/2 T A^-1/2`` and ``A^-1/2 Tdot A^-1/2``, so traces of
products, spectra and whitened quadratic forms coincide.
``a_n = tr(CD)/tr(C^2)`` and ``Dperp = D - a_n C``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import FactorizationError, ParameterError
from .spectral import HurstIndex, Regime, autocov, autocov_dH

MAX_DIM = 16384


@dataclass(frozen=True)
class Theta:
    """Parameter pair ``(sigma, H)``."""

    sigma: float
    hurst: HurstIndex

    def __post_init__(self):
        sigma = float(self.sigma)
        if not np.isfinite(sigma) or sigma <= 0.0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma!r}")
        object.__setattr__(self, "sigma", sigma)
        if not isinstance(self.hurst, HurstIndex):
            object.__setattr__(self, "hurst", HurstIndex(self.hurst))

    @classmethod
    def of(cls, sigma: float, H: float) -> "Theta":
        return cls(sigma, HurstIndex(H))

    @property
    def H(self) -> float:
        return self.hurst.H

    @property
    def p(self) -> float:
        return self.hurst.p

    @property
    def regime(self) -> Regime:
        return self.hurst.regime


@dataclass(frozen=True)
class SamplingScheme:
    """Equispaced sampling ``Delta = n^-alpha`` over the horizon ``n Delta``."""

    n: int
    alpha: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"n must be an integer >= 2, got {self.n!r}")
        if not 0.0 < float(self.alpha) < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def Delta(self) -> float:
        return float(self.n) ** -self.alpha

    @property
    def horizon(self) -> float:
        return float(self.n) ** (1.0 - self.alpha)

    @property
    def L(self) -> float:
        """``ln(1/Delta)``."""
        return self.alpha * np.log(self.n)

    def gamma(self, theta: Theta) -> float:
        """Signal-to-noise ratio ``sigma^2 Delta^(2H-1)``."""
        return theta.sigma**2 * self.Delta**theta.p

    def eps(self, theta: Theta) -> float:
        """``Delta^(1-2H)``; ``gamma * eps = sigma^2``."""
        return self.Delta ** (-theta.p)


class Symbol(str, Enum):
    FGN = "fgn"
    FGN_DH = "fgn_dH"


@dataclass(frozen=True, eq=False)
class SymToeplitz:
    """Symmetric Toeplitz matrix stored by its first column."""

    n: int
    first_col: np.ndarray
    symbol_tag: Symbol

    def dense(self) -> np.ndarray:
        return sla.toeplitz(self.first_col)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``T @ x`` for a vector or an ``n x B`` block (FFT based)."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ParameterError(f"dimension mismatch: {x.shape[0]} != {self.n}")
        return sla.matmul_toeplitz(self.first_col, x, check_finite=False)


def build_fgn_cov(H, n: int, derivative: bool = False, *, max_dim: int = MAX_DIM) -> SymToeplitz:
    """``T_n(H)`` (or its H-derivative) as a :class:`SymToeplitz`."""
    if int(n) != n or n < 2:
        raise ParameterError(f"n must be an integer >= 2, got {n!r}")
    if n > max_dim:
        raise ParameterError(f"n = {n} exceeds the dense size cap {max_dim}")
    k = np.arange(int(n), dtype=float)
    if derivative:
        return SymToeplitz(int(n), autocov_dH(H, k), Symbol.FGN_DH)
    return SymToeplitz(int(n), autocov(H, k), Symbol.FGN)


@dataclass(frozen=True)
class TraceSuite:
    trC2: float
    trCD: float
    trD2: float
    a_n: float
    trDperp2: float
    frobC: float
    frobDperp: float
    opC: float
    opD: float
    opDperp: float
    trC: float
    trD: float


@dataclass(frozen=True, eq=False)
class CovModel:
    """Factored ``A = I + gamma T``; the covariance of the increments is ``Delta A``."""

    theta: Theta
    scheme: SamplingScheme
    T: SymToeplitz
    Tdot: SymToeplitz
    chol_A: np.ndarray

    @property
    def n(self) -> int:
        return self.scheme.n

    @property
    def gamma(self) -> float:
        return self.scheme.gamma(self.theta)

    @property
    def Delta(self) -> float:
        return self.scheme.Delta

    @cached_property
    def logdet_A(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.chol_A))))

    @cached_property
    def traces(self) -> TraceSuite:
        return trace_suite(self)

    def solve(self, x: np.ndarray) -> np.ndarray:
        """``A^-1 x`` for a vector or an ``n x B`` block."""
        return sla.cho_solve((self.chol_A, True), x, check_finite=False)

    def whiten(self, x: np.ndarray) -> np.ndarray:
        """``L^-1 x / sqrt(Delta)``: identity covariance under the model."""
        return sla.solve_triangular(self.chol_A, x, lower=True, check_finite=False) / np.sqrt(
            self.Delta
        )

    def covariance(self) -> np.ndarray:
        """Dense ``V = Delta (I + gamma T)``."""
        A = self.gamma * self.T.dense()
        A[np.diag_indices_from(A)] += 1.0
        return self.Delta * A


def build_model(theta: Theta, scheme: SamplingScheme, *, max_dim: int = MAX_DIM) -> CovModel:
    T = build_fgn_cov(theta.hurst, scheme.n, max_dim=max_dim)
    Tdot = build_fgn_cov(theta.hurst, scheme.n, derivative=True, max_dim=max_dim)
    A = scheme.gamma(theta) * T.dense()
    A[np.diag_indices_from(A)] += 1.0
    try:
        L = sla.cholesky(A, lower=True, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"Cholesky factorization of A failed: {exc}") from exc
    return CovModel(theta, scheme, T, Tdot, L)


def _congruence(L: np.ndarray, K: SymToeplitz) -> np.ndarray:
    # L^-1 K L^-T for symmetric K, symmetrized against rounding
    X = sla.solve_triangular(L, K.dense(), lower=True, overwrite_b=True, check_finite=False)
    X = sla.solve_triangular(L, X.T, lower=True, overwrite_b=True, check_finite=False)
    X += X.T
    X *= 0.5
    return X


def _dense_extreme(M: np.ndarray, which: str) -> float:
    w = sla.eigh(M, eigvals_only=True, check_finite=False)
    return float(w[-1]) if which == "LA" else float(max(abs(w[0]), abs(w[-1])))


def _extreme_eig(M: np.ndarray, which: str, *, rtol: float = 1e-10, maxiter: int = 150) -> float:
    """Largest eigenvalue (``"LA"``) or spectral radius (``"LM"``) of symmetric ``M``.

    Lanczos with full reorthogonalization, accepted once the Ritz residual
    ``|beta_j s_j|`` of the extreme Ritz pair is below ``rtol |theta|`` (it
    bounds the distance to an eigenvalue).  Clustered extremes stall the
    residual; after ``maxiter`` steps the dense symmetric eigensolver is used.
    """
    n = M.shape[0]
    if n <= 64:
        return _dense_extreme(M, which)
    m = min(maxiter, n - 1)
    V = np.empty((m + 1, n))
    v = np.random.default_rng(0).standard_normal(n)
    V[0] = v / np.linalg.norm(v)
    alpha: list[float] = []
    beta: list[float] = []
    for j in range(m):
        w = M @ V[j]
        a = float(V[j] @ w)
        w -= a * V[j]
        if j:
            w -= beta[-1] * V[j - 1]
        for _ in range(2):
            w -= V[: j + 1].T @ (V[: j + 1] @ w)
        alpha.append(a)
        b = float(np.linalg.norm(w))
        if j >= 2:
            ritz, S = sla.eigh_tridiagonal(np.array(alpha), np.array(beta))
            i = len(ritz) - 1 if which == "LA" or abs(ritz[-1]) >= abs(ritz[0]) else 0
            theta = float(ritz[i])
            if b * abs(S[-1, i]) <= rtol * abs(theta):
                return theta if which == "LA" else abs(theta)
        if b == 0.0:
            break
        beta.append(b)
        V[j + 1] = w / b
    return _dense_extreme(M, which)


def trace_suite(model: CovModel) -> TraceSuite:
    """Exact dense traces, Frobenius and operator norms of ``C``, ``D``, ``Dperp``."""
    L = model.chol_A
    C = _congruence(L, model.T)
    trC2 = float(np.einsum("ij,ij->", C, C))
    trC = float(np.trace(C))
    opC = _extreme_eig(C, "LA")
    D = _congruence(L, model.Tdot)
    trCD = float(np.einsum("ij,ij->", C, D))
    trD2 = float(np.einsum("ij,ij->", D, D))
    trD = float(np.trace(D))
    opD = _extreme_eig(D, "LM")
    a_n = trCD / trC2
    D -= a_n * C
    del C
    trDperp2 = float(np.einsum("ij,ij->", D, D))
    opDperp = _extreme_eig(D, "LM")
    return TraceSuite(
        trC2=trC2,
        trCD=trCD,
        trD2=trD2,
        a_n=a_n,
        trDperp2=trDperp2,
        frobC=float(np.sqrt(trC2)),
        frobDperp=float(np.sqrt(trDperp2)),
        opC=opC,
        opD=opD,
        opDperp=opDperp,
        trC=trC,
        trD=trD,
    )


def quad_form(model: CovModel, which: str, x: np.ndarray) -> np.ndarray | float:
    """``x^T A^-1 K A^-1 x`` with ``K`` = ``T`` (C), ``Tdot`` (D) or ``Tdot - a_n T`` (Dperp).

    ``x`` may be a vector or an ``n x B`` block (one value per column).
    Applied to ``x = X/sqrt(Delta)`` this is the whitened form ``Z^T C Z``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != model.n:
        raise ParameterError(f"dimension mismatch: {x.shape[0]} != {model.n}")
    which = which.upper() if which.lower() != "dperp" else "Dperp"
    if which not in ("C", "D", "Dperp"):
        raise ParameterError(f"unknown quadratic form {which!r}")
    y = model.solve(x)
    qc = qd = None
    if which in ("C", "Dperp"):
        qc = np.sum(y * model.T.matvec(y), axis=0)
    if which in ("D", "Dperp"):
        qd = np.sum(y * model.Tdot.matvec(y), axis=0)
    if which == "C":
        out = qc
    elif which == "D":
        out = qd
    else:
        out = qd - model.traces.a_n * qc
    return out if np.ndim(out) else float(out)
