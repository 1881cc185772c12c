from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from mfbm_lan.constants import limit_information
from mfbm_lan.errors import ParameterError, RegimeError
from mfbm_lan.scores import (
    exact_covariance,
    lan_check,
    lan_check_batch,
    llr_representation,
    log_lik,
    normalizers,
    perturbed_theta,
    rate_matrices,
    score_batch,
    scores,
)
from mfbm_lan.simulate import increment_batch, mfbm_increments
from mfbm_lan.toeplitz import SamplingScheme, Theta, build_model


def _model(sigma, H, n=96, alpha=0.3):
    return build_model(Theta.of(sigma, H), SamplingScheme(n, alpha))


def _fisher_dense(sigma, H, n, alpha=0.3, e=1e-6):
    # 1/2 tr(V^-1 dV_i V^-1 dV_j) with central differences of V
    sc = SamplingScheme(n, alpha)
    V = build_model(Theta.of(sigma, H), sc).covariance()
    dS = (build_model(Theta.of(sigma + e, H), sc).covariance() - build_model(Theta.of(sigma - e, H), sc).covariance()) / (2 * e)
    dH = (build_model(Theta.of(sigma, H + e), sc).covariance() - build_model(Theta.of(sigma, H - e), sc).covariance()) / (2 * e)
    Vi = np.linalg.inv(V)
    P = [Vi @ dS, Vi @ dH]
    return np.array([[0.5 * np.sum(P[i] * P[j].T) for j in range(2)] for i in range(2)])


class TestLikelihood:
    @pytest.mark.parametrize("H", [0.3, 0.6, 0.8])
    def test_against_scipy(self, H):
        model = _model(1.2, H, n=60)
        x = mfbm_increments(model.theta, model.scheme, 0).x
        ref = multivariate_normal(cov=model.covariance()).logpdf(x)
        assert log_lik(model, x) == pytest.approx(ref, rel=1e-11)

    def test_block(self):
        model = _model(1.0, 0.8)
        X = increment_batch(model.theta, model.scheme, 1, range(3))
        assert log_lik(model, X) == pytest.approx([log_lik(model, X[:, j]) for j in range(3)])

    def test_dimension(self):
        with pytest.raises(ParameterError):
            log_lik(_model(1.0, 0.8), np.ones(5))


class TestScores:
    @pytest.mark.parametrize("H", [0.3, 0.6, 0.8])
    def test_finite_difference_of_likelihood(self, H):
        sigma, e = 1.1, 1e-6
        model = _model(sigma, H)
        x = mfbm_increments(model.theta, model.scheme, 3).x
        sc = model.scheme
        ll = lambda s, h: log_lik(build_model(Theta.of(s, h), sc), x)
        ds = (ll(sigma + e, H) - ll(sigma - e, H)) / (2 * e)
        dh = (ll(sigma, H + e) - ll(sigma, H - e)) / (2 * e)
        ev = scores(model, x)
        assert ev.S_sigma == pytest.approx(ds, rel=1e-5, abs=1e-5)
        assert ev.S_H == pytest.approx(dh, rel=1e-5, abs=1e-5)

    @given(
        H=st.sampled_from([0.3, 0.6, 0.8, 0.9]),
        sigma=st.floats(0.3, 3.0),
        rep=st.integers(0, 1000),
    )
    @settings(max_examples=25)
    def test_decomposition_and_projection(self, H, sigma, rep):
        model = _model(sigma, H, n=64)
        x = mfbm_increments(model.theta, model.scheme, 7, rep).x
        ev = scores(model, x)
        lnD = np.log(model.Delta)
        scale = max(abs(ev.S_H), abs(ev.R_H), abs(sigma * lnD * ev.S_sigma), 1.0)
        assert ev.S_H - (ev.R_H + sigma * lnD * ev.S_sigma) == pytest.approx(0.0, abs=1e-10 * scale)
        a = model.traces.a_n
        assert ev.R_H_perp == pytest.approx(ev.R_H - 0.5 * sigma * a * ev.S_sigma, rel=1e-12, abs=1e-12)
        nz = ev.normalizers
        assert ev.Xi == pytest.approx(np.array([ev.S_sigma, ev.R_H_perp]) / nz.sqrtT)
        assert ev.U == pytest.approx(np.array([ev.S_sigma, ev.R_H / nz.L_n]) / nz.sqrtT)

    def test_block_matches_single(self):
        model = _model(1.0, 0.8)
        X = increment_batch(model.theta, model.scheme, 2, range(4))
        b = score_batch(model, X)
        for j in range(4):
            ev = scores(model, X[:, j])
            assert b.S_sigma[j] == pytest.approx(ev.S_sigma)
            assert b.R_H_perp[j] == pytest.approx(ev.R_H_perp)

    @pytest.mark.parametrize("H", [0.3, 0.6, 0.8])
    def test_exact_covariance_is_fisher_information(self, H):
        sigma, n = 1.0, 80
        model = _model(sigma, H, n=n)
        I = _fisher_dense(sigma, H, n)
        nz = normalizers(model)
        lnD = np.log(model.Delta)
        # (S_sigma, R_H) = (S_sigma, S_H - sigma lnD S_sigma)
        K = np.array([[1.0, 0.0], [-sigma * lnD, 1.0]])
        raw = K @ I @ K.T
        U = exact_covariance(model, "U")
        d = np.array([1.0, 1.0 / nz.L_n]) / nz.sqrtT
        assert U == pytest.approx(raw * np.outer(d, d), rel=1e-6)

    def test_projection_decorrelates(self):
        model = _model(1.0, 0.8, n=200)
        C = exact_covariance(model, "Xi")
        assert C[0, 1] == 0.0
        U = exact_covariance(model, "U")
        a = model.traces.a_n
        # Var R_perp = Var R_H - (sigma a/2)^2 Var S_sigma after orthogonalization
        nz = normalizers(model)
        var_rperp = U[1, 1] * nz.L_n**2 - (0.5 * a) ** 2 * U[0, 0]
        assert C[1, 1] == pytest.approx(var_rperp, rel=1e-8)

    def test_native_vector_normalization(self):
        for H, attr in [(0.6, "v_n"), (0.3, "sqrt_n")]:
            model = _model(1.0, H)
            x = mfbm_increments(model.theta, model.scheme, 0).x
            ev = scores(model, x)
            s = getattr(ev.normalizers, attr)
            assert ev.native == pytest.approx(np.array([ev.S_sigma, ev.R_H]) / s)

    def test_monte_carlo_moments(self):
        model = _model(1.0, 0.8, n=128)
        X = increment_batch(model.theta, model.scheme, 5, range(4000))
        Xi = score_batch(model, X).Xi()
        C = exact_covariance(model, "Xi")
        se = np.sqrt(np.diag(C) / X.shape[1])
        assert np.all(np.abs(Xi.mean(axis=0)) < 5 * se)
        rel = np.diag(np.cov(Xi.T)) / np.diag(C) - 1
        assert np.all(np.abs(rel) < 5 * np.sqrt(2 / X.shape[1]))


class TestRatesAndLan:
    def test_rate_matrices(self):
        model = _model(1.0, 0.8)
        r = rate_matrices(model)
        assert r.M == pytest.approx(r.M2 @ r.M1)
        assert r.M[0, 1] == 0.0 and r.M[0, 0] == 1.0 and r.M[1, 1] == 1.0
        assert r.a_n_used == model.traces.a_n
        d = rate_matrices(model, "deterministic")
        assert d.a_n_used == pytest.approx(2 * model.scheme.L + -7.161738, abs=1e-5)

    def test_rate_matrices_regime(self):
        model = _model(1.0, 0.6)
        assert rate_matrices(model).M == pytest.approx(rate_matrices(model).M1)
        with pytest.raises(RegimeError):
            rate_matrices(model, "deterministic")

    def test_perturbed_theta(self):
        model = _model(1.0, 0.8)
        th, inreg = perturbed_theta(model, (0.0, 0.0))
        assert (th.sigma, th.H) == (1.0, 0.8) and inreg
        with pytest.raises(ParameterError):
            perturbed_theta(model, (-1e3, 0.0))

    def test_llr_representation(self):
        model = _model(1.0, 0.8, n=128)
        th_h, _ = perturbed_theta(model, (0.5, -0.5))
        model_h = build_model(th_h, model.scheme)
        x = mfbm_increments(model.theta, model.scheme, 1).x
        ref = log_lik(model_h, x) - log_lik(model, x)
        assert llr_representation(model, model_h, x) == pytest.approx(ref, rel=1e-9, abs=1e-11)

    def test_lan_check_zero_direction(self):
        model = _model(1.0, 0.8)
        x = mfbm_increments(model.theta, model.scheme, 1).x
        c = lan_check(model, (0.0, 0.0), x, limit_information(model.theta))
        assert c.gap == 0.0 and c.llr_exact == 0.0

    def test_lan_check_regime(self):
        model = _model(1.0, 0.6)
        x = mfbm_increments(model.theta, model.scheme, 1).x
        with pytest.raises(RegimeError):
            lan_check(model, (1.0, 0.0), x, limit_information(model.theta))

    def test_finite_information_expansion_is_tight(self):
        model = _model(1.0, 0.8, n=512)
        X = increment_batch(model.theta, model.scheme, 2, range(50))
        checks = lan_check_batch(model, (1.0, 0.0), X, limit_information(model.theta))
        gaps = np.array([c.gap_finite_info for c in checks])
        assert np.mean(np.abs(gaps)) < 0.1
        assert all(c.llr_exact == pytest.approx(c.llr_predicted + c.gap) for c in checks)
