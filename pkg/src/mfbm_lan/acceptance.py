"""Exit criteria of the library as executable checks.

Each ``criterion_k`` returns a :class:`CriterionResult` made of named checks
with the measured value, the target and the tolerance.  The same functions
back the ``accept`` CLI command and the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .constants import j_constants, j_constants_oracle, limit_information
from .experiments import (
    DEFAULT_H_GRID,
    degeneracy_report,
    deterministic_correlation,
    lan_sweep,
    mc_clt,
    opf_decay,
    trace_convergence,
)
from .quadrature import graded_integral
from .scores import llr_representation, log_lik, perturbed_theta, scores
from .simulate import mfbm_increments
from .spectral import autocov, density
from .toeplitz import CovModel, SamplingScheme, Theta, build_model

REFERENCE_J0 = 0.2820
REFERENCE_JPERP = 34.1772
REFERENCE_VAR = (0.0897, 2.7197)

SWEEP = (256, 512, 1024, 2048, 4096)
ALPHA = 0.3
MC_N = 4096
MC_R = 2000
MC_SEED = 1
LAN_N = (512, 1024, 2048)
LAN_R = 500
LAN_SEED = 2


@dataclass
class Check:
    name: str
    value: float
    target: str
    passed: bool

    def line(self) -> str:
        return f"    [{'ok' if self.passed else 'XX'}] {self.name}: {self.value:.6g} (target {self.target})"


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, target: str, passed: bool) -> None:
        self.checks.append(Check(name, float(value), target, bool(passed)))

    def header(self) -> str:
        return f"criterion {self.number} {'PASS' if self.passed else 'FAIL'}: {self.title} ({self.elapsed:.1f}s)"

    def lines(self) -> list[str]:
        return [self.header()] + [c.line() for c in self.checks]


class ModelCache:
    """Shares factored models between criteria."""

    def __init__(self):
        self._models: dict = {}
        self.results: dict = {}

    def get(self, theta: Theta, n: int, alpha: float = ALPHA) -> CovModel:
        key = (theta.sigma, theta.H, n, alpha)
        if key not in self._models:
            self._models[key] = build_model(theta, SamplingScheme(n, alpha))
        return self._models[key]

    def sweep(self, theta: Theta, n_list, alpha: float = ALPHA) -> dict:
        return {n: self.get(theta, n, alpha) for n in n_list}

    def drop(self, theta: Theta) -> None:
        for k in [k for k in self._models if k[:2] == (theta.sigma, theta.H)]:
            del self._models[k]


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _strictly_decreasing(v) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.all(np.diff(v) < 0))


@_timed
def criterion_1(cache: ModelCache | None = None) -> CriterionResult:
    res = CriterionResult(1, "closed-form constants at (H, sigma) = (0.8, 1)")
    theta = Theta.of(1.0, 0.8)
    J = j_constants(theta)
    res.add("J0", J.J0, f"{REFERENCE_J0} +- 5e-4", abs(J.J0 - REFERENCE_J0) <= 5e-4)
    res.add("Jperp", J.Jperp, f"{REFERENCE_JPERP} +- 0.02", abs(J.Jperp - REFERENCE_JPERP) <= 0.02)
    info = limit_information(theta)
    for i, t in enumerate(REFERENCE_VAR):
        v = info.matrix[i, i]
        res.add(f"I_perp[{i},{i}]", v, f"{t} +- 1%", abs(v - t) <= 0.01 * t)
    return res


@_timed
def criterion_2(cache: ModelCache | None = None) -> CriterionResult:
    res = CriterionResult(2, "closed form vs quadrature oracle on the (H, sigma) grid")
    worst = {"J0": 0.0, "J1": 0.0, "J2": 0.0}
    for H in (0.78, 0.80, 0.85, 0.90):
        for s in (0.5, 1.0, 2.0):
            th = Theta.of(s, H)
            a, b = j_constants(th), j_constants_oracle(th)
            for k in worst:
                worst[k] = max(worst[k], abs(getattr(a, k) / getattr(b, k) - 1.0))
    for k, v in worst.items():
        res.add(f"max rel diff {k}", v, "<= 1e-6", v <= 1e-6)
    return res


def fourier_coefficient(H: float, k: int) -> float:
    """``(1/2pi) int_{-pi}^{pi} f_H(lambda) cos(k lambda) d lambda``."""
    return graded_integral(lambda lam: density(H, lam) * np.cos(k * lam)).value / np.pi


@_timed
def criterion_3(cache: ModelCache | None = None) -> CriterionResult:
    res = CriterionResult(3, "Fourier inversion of f_H recovers rho_H")
    for H in (0.6, 0.8):
        errs = [abs(fourier_coefficient(H, k) - autocov(H, k)) for k in range(21)]
        res.add(f"H={H} max |coef - rho| k<=20", max(errs), "< 1e-7", max(errs) < 1e-7)
        res.add(f"H={H} |coef_0 - 1|", errs[0], "< 1e-7", errs[0] < 1e-7)
    return res


@_timed
def criterion_4(cache: ModelCache | None = None) -> CriterionResult:
    res = CriterionResult(4, "exact finite-n identities")
    worst_dec = worst_proj = 0.0
    for H, n in ((0.8, 256), (0.6, 128), (0.3, 200)):
        th = Theta.of(1.3, H)
        sc = SamplingScheme(n, ALPHA)
        model = build_model(th, sc)
        for rep in range(5):
            e = scores(model, mfbm_increments(th, sc, 11, rep).x)
            worst_dec = max(worst_dec, abs(e.S_H - th.sigma * np.log(sc.Delta) * e.S_sigma - e.R_H) / (abs(e.S_H) + 1))
            worst_proj = max(worst_proj, abs(e.R_H_perp + 0.5 * th.sigma * model.traces.a_n * e.S_sigma - e.R_H) / (abs(e.S_H) + 1))
    res.add("S_H decomposition residual / (|S_H|+1)", worst_dec, "<= 1e-10", worst_dec <= 1e-10)
    res.add("projection residual / (|S_H|+1)", worst_proj, "<= 1e-10", worst_proj <= 1e-10)

    th = Theta.of(1.0, 0.8)
    model = build_model(th, SamplingScheme(256, ALPHA))
    L = model.chol_A
    C = sla.solve_triangular(L, sla.solve_triangular(L, model.T.dense(), lower=True).T, lower=True)
    D = sla.solve_triangular(L, sla.solve_triangular(L, model.Tdot.dense(), lower=True).T, lower=True)
    tr = model.traces
    orth = abs(np.sum(C * (D - tr.a_n * C))) / (tr.frobC * tr.frobDperp)
    res.add("|tr(C Dperp)| / (|C|_F |Dperp|_F)", orth, "<= 1e-9", orth <= 1e-9)

    worst_llr = 0.0
    for H, n in ((0.8, 128), (0.8, 256)):
        th = Theta.of(1.0, H)
        sc = SamplingScheme(n, ALPHA)
        model = build_model(th, sc)
        x = mfbm_increments(th, sc, 5).x
        for h in ((1.0, 0.0), (0.0, 1.0), (-0.7, 0.4)):
            th_h, _ = perturbed_theta(model, h)
            mh = build_model(th_h, sc)
            d = (log_lik(mh, x) - log_lik(model, x)) - llr_representation(model, mh, x)
            worst_llr = max(worst_llr, abs(d))
    res.add("|LLR direct - LLR via S|", worst_llr, "<= 1e-8", worst_llr <= 1e-8)

    th = Theta.of(1.0, 0.8)
    sc = SamplingScheme(128, ALPHA)
    model = build_model(th, sc)
    V = model.covariance() / sc.Delta
    w, Q = np.linalg.eigh(V)
    Ainv_half = (Q / np.sqrt(w)) @ Q.T
    Csym = Ainv_half @ model.T.dense() @ Ainv_half
    worst_sw = 0.0
    for rep in range(5):
        x = mfbm_increments(th, sc, 3, rep).x
        z = Ainv_half @ x / np.sqrt(sc.Delta)
        e = scores(model, x)
        ref = model.gamma / th.sigma * (z @ Csym @ z - np.trace(Csym))
        worst_sw = max(worst_sw, abs(e.S_sigma - ref) / abs(ref))
    res.add("sandwich vs factor-based S_sigma (rel)", worst_sw, "<= 1e-8", worst_sw <= 1e-8)
    return res


@_timed
def criterion_5(cache: ModelCache | None = None) -> CriterionResult:
    cache = cache or ModelCache()
    res = CriterionResult(5, "trace asymptotics along n = 256..4096 at (0.8, 1, 0.3)")
    th = Theta.of(1.0, 0.8)
    tab = trace_convergence(th, SWEEP, ALPHA, models=cache.sweep(th, SWEEP))
    for name in ("C2", "CD", "D2"):
        g = tab.column(f"gap_{name}")
        res.add(
            f"relative Szego gap tr({name}) decreasing; last",
            g[-1],
            "strictly decreasing " + np.array2string(g, precision=4),
            _strictly_decreasing(g),
        )
    J = j_constants(th)
    jp = tab.column("Jperp_n")[-1]
    res.add("trDperp2 2pi/(n Delta^(1-2p)) at n=4096", jp, f"{J.Jperp:.4f} +- 10%", abs(jp / J.Jperp - 1) <= 0.10)
    am = tab.column("a_minus_2L")[-1]
    res.add("a_n - 2 ln(1/Delta) at n=4096", am, f"m = {J.m:.4f} +- 10%", abs(am / J.m - 1) <= 0.10)
    return res


def _supercritical_mc(cache: ModelCache):
    if "mc_0.8" not in cache.results:
        th = Theta.of(1.0, 0.8)
        model = cache.get(th, MC_N)
        cache.results["mc_0.8"] = mc_clt(th, model.scheme, MC_R, MC_SEED, model=model)
    return cache.results["mc_0.8"]


@_timed
def criterion_6(cache: ModelCache | None = None) -> CriterionResult:
    cache = cache or ModelCache()
    res = CriterionResult(6, "Monte Carlo CLT of Xi at (H, sigma, n, alpha, R) = (0.8, 1, 4096, 0.3, 2000)")
    rep = _supercritical_mc(cache)
    for i, t in enumerate(REFERENCE_VAR):
        v = rep.sample_cov[i, i]
        res.add(f"Var(Xi_{i + 1})", v, f"{t} +- 15%", abs(v / t - 1) <= 0.15)
    res.add("|corr(Xi_1, Xi_2)|", abs(rep.correlation), "< 0.1", abs(rep.correlation) < 0.1)
    for i in range(2):
        res.add(f"KS(Xi_{i + 1}) vs N(0, target)", rep.ks[i], "< 0.05", rep.ks[i] < 0.05)
    return res


@_timed
def criterion_7(cache: ModelCache | None = None) -> CriterionResult:
    cache = cache or ModelCache()
    res = CriterionResult(7, "degeneracy of the unprojected pair U")
    th = Theta.of(1.0, 0.8)
    rep = _supercritical_mc(cache)
    model = cache.get(th, MC_N)
    deg = degeneracy_report(th, model.scheme, MC_R, MC_SEED, model=model, samples=rep.samples)
    res.add("sample corr(U) at n=4096", deg.sample_correlation, "> 0.95", deg.sample_correlation > 0.95)
    det = np.array([deterministic_correlation(m) for m in cache.sweep(th, SWEEP).values()])
    res.add(
        "deterministic corr(U) increasing toward 1; last",
        det[-1],
        "strictly increasing, < 1: " + np.array2string(det, precision=4),
        bool(np.all(np.diff(det) > 0) and np.all(det < 1)),
    )
    return res


@_timed
def criterion_8(cache: ModelCache | None = None) -> CriterionResult:
    cache = cache or ModelCache()
    res = CriterionResult(8, "regimes H = 0.6 and H = 0.3 at n = 4096, R = 2000; op/F slope at H = 0.6")
    for H in (0.6, 0.3):
        th = Theta.of(1.0, H)
        model = cache.get(th, MC_N)
        rep = mc_clt(th, model.scheme, MC_R, MC_SEED, model=model)
        worst = float(np.max(rep.rel_error))
        res.add(
            f"H={H} max entrywise rel. error of sample cov",
            worst,
            "<= 15%; target " + np.array2string(rep.target, precision=4).replace("\n", ""),
            worst <= 0.15,
        )
    th = Theta.of(1.0, 0.6)
    tab = opf_decay(th, SWEEP, ALPHA, models=cache.sweep(th, SWEEP))
    slope = tab.constants["slope_opC_frobC"]
    res.add("H=0.6 log-log slope of opC/frobC", slope, f"{th.p - 0.5:.2f} +- 0.1", abs(slope - (th.p - 0.5)) <= 0.1)
    cache.drop(th)
    cache.drop(Theta.of(1.0, 0.3))
    return res


@_timed
def criterion_9(cache: ModelCache | None = None) -> CriterionResult:
    res = CriterionResult(9, "LAN gap decreasing along n = 512, 1024, 2048 (R = 500)")
    th = Theta.of(1.0, 0.8)
    sw = lan_sweep(th, LAN_N, ALPHA, LAN_R, LAN_SEED)
    for i, h in enumerate(sw.h_grid):
        g = sw.mean_abs_gap[i]
        res.add(
            f"h=({h[0]:.3g},{h[1]:.3g}) mean|gap| decreasing; last",
            g[-1],
            "strictly decreasing " + np.array2string(g, precision=4),
            _strictly_decreasing(g),
        )
    return res


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_all(numbers=None, cache: ModelCache | None = None) -> list[CriterionResult]:
    cache = cache or ModelCache()
    return [CRITERIA[k](cache) for k in (numbers or sorted(CRITERIA))]
