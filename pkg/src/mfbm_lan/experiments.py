"""Monte Carlo CLT studies, trace convergence tables and op/F diagnostics."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .constants import (
    LimitInformation,
    j_constants,
    limit_information,
    subcritical_integrals,
    t_constants,
)
from .errors import ParameterError, RegimeError
from .quadrature import graded_integral
from .scores import exact_covariance, lan_check_batch, native_vector, rate_matrices, score_batch
from .simulate import increment_batch
from .spectral import Regime, density_amplitude, density_and_dH
from .toeplitz import CovModel, SamplingScheme, Theta, build_model

RELIABLE_R = 100

DEFAULT_H_GRID = (
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)),
)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class MCSamples:
    """Per-replication score quantities, indexed by replication number."""

    S_sigma: np.ndarray
    S_H: np.ndarray
    R_H: np.ndarray
    R_H_perp: np.ndarray
    native: np.ndarray
    Xi: np.ndarray
    U: np.ndarray


def simulate_scores(
    model: CovModel, R: int, seed: int, *, block: int = 50, workers: int = 1
) -> MCSamples:
    """Score quantities for replications ``0..R-1`` of ``model``.

    Blocks are written into preallocated arrays by replication index, so the
    result does not depend on ``workers`` or on completion order.
    """
    if R < 2:
        raise ParameterError("need at least 2 replications")
    out = {k: np.empty(R) for k in ("S_sigma", "S_H", "R_H", "R_H_perp")}
    native = np.empty((R, 2))
    Xi = np.empty((R, 2))
    U = np.empty((R, 2))
    model.traces  # factor-level caches are filled before any concurrent use

    def run(start: int) -> None:
        reps = range(start, min(start + block, R))
        X = increment_batch(model.theta, model.scheme, seed, reps)
        b = score_batch(model, X)
        sl = slice(reps.start, reps.stop)
        out["S_sigma"][sl] = b.S_sigma
        out["S_H"][sl] = b.S_H
        out["R_H"][sl] = b.R_H
        out["R_H_perp"][sl] = b.R_H_perp
        native[sl] = native_vector(model, b)
        Xi[sl] = b.Xi()
        U[sl] = b.U()

    starts = range(0, R, block)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return MCSamples(native=native, Xi=Xi, U=U, **out)


def _corr(a: np.ndarray) -> float:
    c = np.cov(a, rowvar=False)
    return float(c[0, 1] / np.sqrt(c[0, 0] * c[1, 1]))


@dataclass
class MCReport:
    theta: Theta
    scheme: SamplingScheme
    R: int
    seed: int
    regime: Regime
    sample_mean: np.ndarray
    sample_cov: np.ndarray
    target: np.ndarray
    exact_cov: np.ndarray
    z_scores: np.ndarray
    rel_error: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    ks: np.ndarray
    ks_exact: np.ndarray
    correlation: float
    correlation_unprojected: float
    reliable: bool
    elapsed: float
    samples: MCSamples = field(repr=False)

    def summary(self) -> dict:
        return {
            "theta": {"sigma": self.theta.sigma, "H": self.theta.H},
            "scheme": {"n": self.scheme.n, "alpha": self.scheme.alpha},
            "R": self.R,
            "seed": self.seed,
            "regime": self.regime.value,
            "sample_mean": self.sample_mean.tolist(),
            "sample_cov": self.sample_cov.tolist(),
            "target": self.target.tolist(),
            "exact_cov": self.exact_cov.tolist(),
            "z_scores": self.z_scores.tolist(),
            "rel_error": self.rel_error.tolist(),
            "skewness": self.skewness.tolist(),
            "excess_kurtosis": self.excess_kurtosis.tolist(),
            "ks": self.ks.tolist(),
            "ks_exact": self.ks_exact.tolist(),
            "correlation": self.correlation,
            "correlation_unprojected": self.correlation_unprojected,
            "reliable": self.reliable,
            "elapsed_s": self.elapsed,
        }


def _cov_se(S: np.ndarray, R: int) -> np.ndarray:
    # standard error of Gaussian sample covariance entries
    d = np.diag(S)
    return np.sqrt((np.outer(d, d) + S * S) / R)


def mc_clt(
    theta: Theta,
    scheme: SamplingScheme,
    R: int,
    seed: int,
    *,
    block: int = 50,
    workers: int = 1,
    model: CovModel | None = None,
    info: LimitInformation | None = None,
) -> MCReport:
    """Monte Carlo law of the regime-normalized score vector against its limit."""
    t0 = time.perf_counter()
    model = build_model(theta, scheme) if model is None else model
    info = limit_information(theta) if info is None else info
    smp = simulate_scores(model, R, seed, block=block, workers=workers)
    v = smp.native
    cov = np.cov(v, rowvar=False)
    exact = exact_covariance(model, "native")
    target = np.asarray(info.matrix, dtype=float)
    z = (cov - exact) / _cov_se(exact, R)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(cov - target) / np.abs(target)
    ks = np.array([stats.kstest(v[:, i], "norm", args=(0.0, np.sqrt(target[i, i]))).statistic for i in range(2)])
    ks_ex = np.array([stats.kstest(v[:, i], "norm", args=(0.0, np.sqrt(exact[i, i]))).statistic for i in range(2)])
    return MCReport(
        theta=theta,
        scheme=scheme,
        R=R,
        seed=seed,
        regime=theta.regime,
        sample_mean=v.mean(axis=0),
        sample_cov=cov,
        target=target,
        exact_cov=exact,
        z_scores=z,
        rel_error=rel,
        skewness=stats.skew(v, axis=0),
        excess_kurtosis=stats.kurtosis(v, axis=0),
        ks=ks,
        ks_exact=ks_ex,
        correlation=_corr(v),
        correlation_unprojected=_corr(smp.U),
        reliable=R >= RELIABLE_R,
        elapsed=time.perf_counter() - t0,
        samples=smp,
    )


@dataclass(frozen=True)
class DegeneracyReport:
    sample_correlation: float
    deterministic_correlation: float
    projected_correlation: float
    det_ratio: float
    R: int

    def __float__(self) -> float:
        return self.sample_correlation


def deterministic_correlation(model: CovModel) -> float:
    """``Corr(S_sigma, R_H) = tr(CD) / sqrt(tr(C^2) tr(D^2))``."""
    tr = model.traces
    return float(tr.trCD / np.sqrt(tr.trC2 * tr.trD2))


def degeneracy_report(
    theta: Theta,
    scheme: SamplingScheme,
    R: int,
    seed: int,
    *,
    model: CovModel | None = None,
    samples: MCSamples | None = None,
    workers: int = 1,
) -> DegeneracyReport:
    if theta.regime is not Regime.SUPERCRITICAL:
        raise RegimeError("the unprojected degeneracy concerns 3/4 < H < 1")
    model = build_model(theta, scheme) if model is None else model
    smp = simulate_scores(model, R, seed, workers=workers) if samples is None else samples
    cU = np.cov(smp.U, rowvar=False)
    return DegeneracyReport(
        sample_correlation=_corr(smp.U),
        deterministic_correlation=deterministic_correlation(model),
        projected_correlation=_corr(smp.Xi),
        det_ratio=float(np.linalg.det(cU) / (cU[0, 0] * cU[1, 1])),
        R=R,
    )


# ---------------------------------------------------------------------------
# trace and op/F tables
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceTable:
    """Rows keyed by ``n``; ``columns`` names the entries of each row."""

    theta: Theta
    alpha: float
    columns: list[str]
    rows: np.ndarray
    constants: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(float(v)) if c != "n" else int(v) for c, v in zip(self.columns, r)])
        return buf.getvalue()


def szego_integrals(theta: Theta, gamma: float) -> tuple[float, float, float]:
    """``int_{-pi}^{pi}`` of ``g^2``, ``g h``, ``h^2`` with ``g = f/(1+gamma f)``, ``h = fdot/(1+gamma f)``."""
    H = theta.H

    def parts(lam):
        f, fd = density_and_dH(H, lam)
        a = 1.0 + gamma * f
        return f / a, fd / a

    def gg(lam):
        g, _ = parts(lam)
        return g * g

    def gh(lam):
        g, h = parts(lam)
        return g * h

    def hh(lam):
        _, h = parts(lam)
        return h * h

    return tuple(2.0 * graded_integral(fn).value for fn in (gg, gh, hh))


def _leading(theta: Theta, scheme: SamplingScheme) -> tuple[float, float, float]:
    n, Delta, L = scheme.n, scheme.Delta, scheme.L
    s = theta.sigma
    regime = theta.regime
    if regime is Regime.SUPERCRITICAL:
        J = j_constants(theta)
        k = n / (2.0 * np.pi) * Delta ** (1.0 - 2.0 * theta.p)
        return k * J.J0, k * (2 * L * J.J0 + J.J1), k * (4 * L * L * J.J0 + 4 * L * J.J1 + J.J2)
    if regime is Regime.SUBCRITICAL:
        i_ff, i_fd, i_dd = subcritical_integrals(theta.H)
        k = n / np.pi
        return k * i_ff, k * i_fd, k * i_dd
    T1, T2 = t_constants(theta.H)
    k = n * scheme.eps(theta) ** 2 / s**4
    return k, k * T1, 2.0 * k * T2


TRACE_COLUMNS = [
    "n",
    "trC2", "szego_C2", "gap_C2",
    "trCD", "szego_CD", "gap_CD",
    "trD2", "szego_D2", "gap_D2",
    "trDperp2", "szego_Dperp2", "gap_Dperp2",
    "lead_C2", "lead_CD", "lead_D2",
    "a_n", "a_szego", "a_tilde", "a_minus_2L",
    "J0_n", "Jperp_n",
]


def trace_convergence(
    theta: Theta, n_list, alpha: float, *, models: dict | None = None
) -> ConvergenceTable:
    """Exact traces against Szegő integrals (exact ``gamma_n``) and leading-order limits."""
    n_list = [int(n) for n in n_list]
    if n_list != sorted(n_list):
        raise ParameterError("n_list must be ascending")
    rows = []
    consts = {}
    if theta.regime is Regime.SUPERCRITICAL:
        J = j_constants(theta)
        consts = {"J0": J.J0, "Jperp": J.Jperp, "m": J.m}
        Js = j_constants(theta, density_amplitude(theta.H))
        consts.update({"J0_spectral": Js.J0, "Jperp_spectral": Js.Jperp, "m_spectral": Js.m})
    for n in n_list:
        scheme = SamplingScheme(n, alpha)
        model = (models or {}).get(n) or build_model(theta, scheme)
        tr = model.traces
        k = n / (2.0 * np.pi)
        i_gg, i_gh, i_hh = szego_integrals(theta, scheme.gamma(theta))
        pC2, pCD, pD2 = k * i_gg, k * i_gh, k * i_hh
        pDp = pD2 - pCD * pCD / pC2
        lC2, lCD, lD2 = _leading(theta, scheme)
        scale = 2.0 * np.pi / (n * scheme.Delta ** (1.0 - 2.0 * theta.p))
        a_tilde = 2.0 * scheme.L + consts["m"] if "m" in consts else np.nan
        rows.append([
            n,
            tr.trC2, pC2, abs(tr.trC2 - pC2) / abs(tr.trC2),
            tr.trCD, pCD, abs(tr.trCD - pCD) / abs(tr.trCD),
            tr.trD2, pD2, abs(tr.trD2 - pD2) / abs(tr.trD2),
            tr.trDperp2, pDp, abs(tr.trDperp2 - pDp) / abs(tr.trDperp2),
            lC2, lCD, lD2,
            tr.a_n, pCD / pC2, a_tilde, tr.a_n - 2.0 * scheme.L,
            tr.trC2 * scale, tr.trDperp2 * scale,
        ])
    return ConvergenceTable(theta, alpha, list(TRACE_COLUMNS), np.array(rows), consts)


OPF_COLUMNS = [
    "n",
    "opC_frobC", "opD_frobD", "opDperp_frobDperp",
    "inv_sqrtT", "chain_bound_C", "rate_sub", "rate_fbm",
    "opC_gamma", "opD_gamma_over_logn",
]


def opf_decay(
    theta: Theta, n_list, alpha: float, *, models: dict | None = None
) -> ConvergenceTable:
    """op/F ratios along ``n_list`` with reference rates and fitted log-log slopes.

    ``chain_bound_C = (1/gamma)/frobC`` is the bound on ``opC/frobC`` implied by
    ``opC <= 1/gamma``; ``rate_sub = n^(p-1/2) log n`` and ``rate_fbm = log n/sqrt(n)``.
    """
    n_list = [int(n) for n in n_list]
    rows = []
    for n in n_list:
        scheme = SamplingScheme(n, alpha)
        model = (models or {}).get(n) or build_model(theta, scheme)
        tr = model.traces
        g = scheme.gamma(theta)
        rows.append([
            n,
            tr.opC / tr.frobC,
            tr.opD / np.sqrt(tr.trD2),
            tr.opDperp / tr.frobDperp,
            1.0 / np.sqrt(scheme.horizon),
            (1.0 / g) / tr.frobC,
            n ** (theta.p - 0.5) * np.log(n),
            np.log(n) / np.sqrt(n),
            tr.opC * g,
            tr.opD * g / np.log(n),
        ])
    rows = np.array(rows)
    table = ConvergenceTable(theta, alpha, list(OPF_COLUMNS), rows)
    if len(n_list) >= 2:
        ln = np.log(rows[:, 0])
        for name in ("opC_frobC", "opD_frobD", "opDperp_frobDperp"):
            table.constants[f"slope_{name}"] = float(np.polyfit(ln, np.log(table.column(name)), 1)[0])
    return table


# ---------------------------------------------------------------------------
# LAN sweep
# ---------------------------------------------------------------------------

@dataclass
class LanSweep:
    n_list: list[int]
    h_grid: list[tuple[float, float]]
    mean_abs_gap: np.ndarray  # (len(h_grid), len(n_list))
    mean_abs_gap_finite: np.ndarray
    mean_gap: np.ndarray
    h_in_regime: np.ndarray
    R: int


def lan_sweep(
    theta: Theta,
    n_list,
    alpha: float,
    R: int,
    seed: int,
    *,
    h_grid=DEFAULT_H_GRID,
    block: int = 100,
) -> LanSweep:
    """Mean absolute LAN gap over ``R`` paths for each ``h`` and ``n``."""
    info = limit_information(theta)
    n_list = [int(n) for n in n_list]
    shape = (len(h_grid), len(n_list))
    mag, magf, mg = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    inreg = np.ones(shape, dtype=bool)
    for j, n in enumerate(n_list):
        scheme = SamplingScheme(n, alpha)
        model = build_model(theta, scheme)
        rates = rate_matrices(model)
        gaps = [[] for _ in h_grid]
        gapsf = [[] for _ in h_grid]
        for start in range(0, R, block):
            X = increment_batch(theta, scheme, seed, range(start, min(start + block, R)))
            for i, h in enumerate(h_grid):
                checks = lan_check_batch(model, h, X, info, rates=rates)
                gaps[i].extend(c.gap for c in checks)
                gapsf[i].extend(c.gap_finite_info for c in checks)
                inreg[i, j] = checks[0].h_in_regime
        for i in range(len(h_grid)):
            g = np.array(gaps[i])
            mag[i, j] = np.mean(np.abs(g))
            mg[i, j] = np.mean(g)
            magf[i, j] = np.mean(np.abs(gapsf[i]))
    return LanSweep(n_list, [tuple(h) for h in h_grid], mag, magf, mg, inreg, R)


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------

def write_scatter_dat(path, samples: np.ndarray, comment: str = "") -> None:
    """Two-column whitespace file for gnuplot (``plot 'f.dat' u 1:2``)."""
    np.savetxt(path, np.asarray(samples)[:, :2], header=comment, comments="# ")


def ellipse_points(cov: np.ndarray, level: float, num: int = 200) -> np.ndarray:
    """Points on ``{x : x^T cov^-1 x = level^2}``."""
    w, V = np.linalg.eigh(np.asarray(cov, dtype=float))
    t = np.linspace(0.0, 2.0 * np.pi, num)
    circle = np.vstack((np.cos(t), np.sin(t)))
    return (V @ (np.sqrt(np.clip(w, 0.0, None))[:, None] * circle) * level).T


def write_ellipse_dat(path, cov: np.ndarray, levels=(1.0, 2.0, 3.0), comment: str = "") -> None:
    """Ellipses separated by blank lines (gnuplot data blocks)."""
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for lv in levels:
            fh.write(f"# level {lv}\n")
            np.savetxt(fh, ellipse_points(cov, lv))
            fh.write("\n\n")
