"""Exact sampling of fGn and of mixed fBm increments.

fGn is drawn by circulant embedding of size ``2n``.  Random streams come from
a counter-based Philox generator keyed by ``(seed, replication, stream)``,
so every replication is reproducible in isolation and independent of the
order in which replications are computed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmbeddingError, ParameterError
from .spectral import HurstIndex, autocov
from .toeplitz import CovModel, SamplingScheme, Theta

FGN_STREAM = 0
WHITE_STREAM = 1

_EMBED_TOL = 1e-8


def stream(seed: int, replication: int = 0, stream_id: int = FGN_STREAM) -> np.random.Generator:
    """Generator for one ``(seed, replication, stream)`` triple."""
    if seed < 0 or replication < 0:
        raise ParameterError("seed and replication must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), int(stream_id)))
    return np.random.Generator(np.random.Philox(ss))


@lru_cache(maxsize=16)
def _embedding_sqrt(H: float, n: int) -> np.ndarray:
    rho = autocov(H, np.arange(n + 1, dtype=float))
    c = np.concatenate((rho, rho[-2:0:-1]))
    lam = np.fft.fft(c).real
    top = lam.max()
    if lam.min() < -_EMBED_TOL * top:
        raise EmbeddingError(
            f"circulant embedding has eigenvalue {lam.min():.3e} (max {top:.3e})"
        )
    np.clip(lam, 0.0, None, out=lam)
    out = np.sqrt(lam / c.size)
    out.flags.writeable = False
    return out


def _fgn_from(rng: np.random.Generator, H: float, n: int, size: int | None) -> np.ndarray:
    root = _embedding_sqrt(H, n)
    N = root.size
    shape = (N,) if size is None else (size, N)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.fft.fft(root * w, axis=-1).real[..., :n]


def fgn_sample(H, n: int, seed: int, replication: int = 0) -> np.ndarray:
    """Exact standard fGn of length ``n``."""
    if int(n) != n or n < 2:
        raise ParameterError(f"n must be an integer >= 2, got {n!r}")
    H = H.H if isinstance(H, HurstIndex) else HurstIndex(H).H
    return _fgn_from(stream(seed, replication, FGN_STREAM), H, int(n), None)


def sample_increments(
    sigma: float, H, n: int, Delta: float, seed: int, replication: int = 0
) -> np.ndarray:
    """``sigma Delta^H G + sqrt(Delta) W``; ``sigma = 0`` gives pure white noise."""
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    H = H.H if isinstance(H, HurstIndex) else HurstIndex(H).H
    white = stream(seed, replication, WHITE_STREAM).standard_normal(int(n))
    fgn = fgn_sample(H, n, seed, replication)
    return sigma * Delta**H * fgn + np.sqrt(Delta) * white


@dataclass(frozen=True, eq=False)
class IncrementPath:
    x: np.ndarray
    theta: Theta
    scheme: SamplingScheme
    seed: int
    replication: int = 0

    def __post_init__(self):
        if self.x.shape != (self.scheme.n,):
            raise ParameterError(f"path length {self.x.shape} != ({self.scheme.n},)")
        if not np.all(np.isfinite(self.x)):
            raise ParameterError("path has non-finite entries")


def mfbm_increments(
    theta: Theta, scheme: SamplingScheme, seed: int, replication: int = 0
) -> IncrementPath:
    x = sample_increments(theta.sigma, theta.hurst, scheme.n, scheme.Delta, seed, replication)
    return IncrementPath(x, theta, scheme, int(seed), int(replication))


def increment_batch(
    theta: Theta, scheme: SamplingScheme, seed: int, replications: range | np.ndarray
) -> np.ndarray:
    """``n x B`` block whose column ``j`` equals ``mfbm_increments(..., replications[j]).x``."""
    reps = list(replications)
    out = np.empty((scheme.n, len(reps)))
    for j, r in enumerate(reps):
        out[:, j] = sample_increments(
            theta.sigma, theta.hurst, scheme.n, scheme.Delta, seed, r
        )
    return out


def whiten(model: CovModel, path: IncrementPath) -> np.ndarray:
    """``Z = L^-1 X / sqrt(Delta)``, identity covariance under the model."""
    if path.theta != model.theta or path.scheme != model.scheme:
        raise ParameterError("path and model do not share (theta, scheme)")
    return model.whiten(path.x)
