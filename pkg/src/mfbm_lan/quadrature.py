"""Composite Gauss-Legendre rules for integrands with a singularity at 0.

Panels are graded geometrically toward the origin, ``[u 2^-(m+1), u 2^-m]``,
so that power and logarithmic singularities are resolved panel by panel.
The contribution of the innermost remainder ``[0, u 2^-(M+1)]`` is
extrapolated from the ratio of the last two panels, which is exact for a
pure power law and accurate to leading order with logarithmic factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import QuadratureError

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadResult:
    value: float
    abserr: float
    panels: int

    def __float__(self) -> float:
        return self.value


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def panel_sums(fun: ArrayFn, breaks: np.ndarray, order: int = 24) -> np.ndarray:
    """Integral of ``fun`` over each panel ``[breaks[i], breaks[i+1]]``.

    ``fun`` is called once on all nodes of all panels.
    """
    a = np.asarray(breaks[:-1], dtype=float)
    b = np.asarray(breaks[1:], dtype=float)
    x, w = _gauss_legendre(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(fun(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return half * (vals @ w)


def _geometric_tail(last: float, prev: float) -> float:
    """Sum of the remaining panels if contributions decay geometrically."""
    if last == 0.0:
        return 0.0
    r = last / prev if prev != 0.0 else np.inf
    if not 0.0 < r < 1.0:
        return np.nan
    return last * r / (1.0 - r)


def graded_integral(
    fun: ArrayFn,
    upper: float = np.pi,
    *,
    depth: int = 120,
    order: int = 24,
    uniform_pieces: int = 16,
    rtol: float = 1e-11,
) -> QuadResult:
    """Integrate ``fun`` over ``(0, upper]``.

    The outer interval ``[upper/16, upper]`` is split uniformly into
    ``uniform_pieces - 1`` panels (to handle oscillatory factors such as
    ``cos(k lambda)``), the rest geometrically down to ``upper 2^-depth``.
    """
    outer = np.linspace(upper / 16.0, upper, uniform_pieces)
    inner = upper * 2.0 ** -np.arange(depth, 3, -1, dtype=float)
    breaks = np.concatenate(([upper * 2.0 ** -(depth + 1)], inner, outer))
    return _integrate_with_tail(fun, breaks, order, rtol, innermost_first=True)


def halfline_integral(
    fun: ArrayFn,
    upper: float,
    *,
    lower_depth: int = 80,
    order: int = 24,
    rtol: float = 1e-11,
) -> QuadResult:
    """Integrate ``fun`` over ``(0, upper]`` for large ``upper``.

    Panels are dyadic, ``[2^m, 2^(m+1)]``, from ``2^-lower_depth`` up to
    ``upper`` (rounded up to a power of two by the caller if needed).
    """
    top = int(np.ceil(np.log2(upper)))
    edges = 2.0 ** np.arange(-lower_depth, top + 1, dtype=float)
    edges[-1] = upper
    edges = edges[edges <= upper]
    if edges[-1] != upper:
        edges = np.append(edges, upper)
    return _integrate_with_tail(fun, edges, order, rtol, innermost_first=True)


def _integrate_with_tail(fun, breaks, order, rtol, innermost_first):
    hi = panel_sums(fun, breaks, order)
    lo = panel_sums(fun, breaks, max(order - 8, 8))
    tail = _geometric_tail(hi[0], hi[1]) if innermost_first else 0.0
    total = float(np.sum(hi[::-1]))
    if not np.isfinite(tail):
        # contributions near zero are not decaying; the integral is not
        # resolved by the grading
        if abs(hi[0]) > rtol * max(abs(total), 1e-300):
            raise QuadratureError(
                "graded quadrature did not converge near 0",
                achieved=abs(hi[0]) / max(abs(total), 1e-300),
            )
        tail = 0.0
    value = total + tail
    abserr = float(abs(np.sum(hi) - np.sum(lo)) + 1e-3 * abs(tail))
    if not np.isfinite(value):
        raise QuadratureError("non-finite quadrature value")
    if abserr > rtol * max(abs(value), 1.0) * 1e3:
        raise QuadratureError(
            f"quadrature error estimate {abserr:.3e} exceeds tolerance",
            achieved=abserr / max(abs(value), 1e-300),
        )
    return QuadResult(value=value, abserr=abserr, panels=len(breaks) - 1)
