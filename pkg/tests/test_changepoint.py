from datetime import date

import cvxpy as cp
import numpy as np
import pytest

from psarima.arima import ArimaOrder, auto_fit, simulate
from psarima.changepoint import (
    CandidateSet,
    DetectorConfig,
    build_design,
    detect,
    extract_candidates,
    fit_segments,
    fused_lasso_fit,
    kkt_violation,
    lambda_max,
    screen,
    select_lambda,
    soft_threshold,
)
from psarima.changepoint.lasso import objective
from psarima.errors import InsufficientDataError, InvalidArgumentError, SegmentFitError
from psarima.series import TimeSeries
from psarima.synth import PiecewiseSpec, constant_model, gen_piecewise

from conftest import ar1, white


def step_series(levels=(0.0, 5.0), length=200):
    spec = PiecewiseSpec(tuple((length, constant_model(v)) for v in levels))
    return gen_piecewise(spec)[0]


def shifted(seed, shift=5.0, n=600, at=300, phi=None):
    base = white() if phi is None else ar1(phi)
    moved = white(mean=shift) if phi is None else ar1(phi, mean=shift)
    return gen_piecewise(PiecewiseSpec(((at, base), (n - at, moved)), seed=seed))[0]


def lasso_oracle(design, lam):
    y, z = design.response, design.regressors
    n, w = z.shape
    b = cp.Variable((n, w))
    fitted = cp.sum(cp.multiply(z, cp.cumsum(b, axis=0)), axis=1)
    problem = cp.Problem(cp.Minimize(cp.sum_squares(y - fitted) / n + lam * cp.sum(cp.abs(b[1:]))))
    problem.solve(solver=cp.CLARABEL)
    return problem.value


class TestDesign:
    def test_indexing(self):
        d = build_design(TimeSeries(np.array([1.0, 2, 3, 4, 5])), p_lag=1)
        assert d.n_rows == 4
        assert d.response[0] == 2.0 and d.regressors[0, 1] == 1.0
        assert d.row_position(0) == 1

    def test_hand_enumerated_dense(self):
        d = build_design(TimeSeries(np.array([1.0, 2, 3, 4])), p_lag=1)
        expected = np.array([
            [1, 1, 1, 1, 0, 0, 0, 0],
            [1, 2, 1, 2, 1, 2, 0, 0],
            [1, 3, 1, 3, 1, 3, 1, 3],
        ], dtype=float)
        np.testing.assert_array_equal(d.dense(), expected)
        np.testing.assert_array_equal(d.response, [2, 3, 4])

    def test_zero_lag_is_mean_shift(self):
        d = build_design(TimeSeries(np.arange(5.0)), p_lag=0)
        np.testing.assert_array_equal(d.regressors, np.ones((5, 1)))
        np.testing.assert_array_equal(d.dense(), np.tril(np.ones((5, 5))))

    def test_solver_matrix_matches_dense(self, rng):
        d = build_design(TimeSeries(rng.normal(size=9)), p_lag=2)
        full = d.dense()
        # the first p_lag + 1 dense blocks coincide; the solver keeps the last of them
        w = d.width
        reduced = full[:, d.p_lag * w:]
        np.testing.assert_array_equal(d.solver_matrix(), reduced)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            build_design(TimeSeries(np.arange(2.0)), p_lag=1)


class TestSoftThreshold:
    def test_examples(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert soft_threshold(-4.0, 1.5) == -2.5

    def test_zero_threshold_is_identity(self, rng):
        v = rng.normal(size=10)
        np.testing.assert_array_equal(soft_threshold(v, 0.0), v)

    def test_negative_threshold(self):
        with pytest.raises(InvalidArgumentError):
            soft_threshold(1.0, -1.0)


class TestFusedLasso:
    def test_null_model_at_lambda_max(self):
        d = build_design(simulate(ar1(0.5), 150, seed=1), p_lag=1)
        fit = fused_lasso_fit(d, lambda_max(d) * 1.0001)
        assert np.all(fit.beta[1:] == 0)
        np.testing.assert_allclose(fit.beta[0], np.linalg.lstsq(d.regressors, d.response,
                                                                rcond=None)[0], atol=1e-8)

    def test_just_below_lambda_max_opens_a_jump(self):
        d = build_design(simulate(ar1(0.5), 150, seed=2), p_lag=1)
        assert np.any(fused_lasso_fit(d, lambda_max(d) * 0.95).beta[1:] != 0)

    def test_noiseless_step_single_jump(self):
        x = step_series()
        d = build_design(x, p_lag=0)
        lam = 0.1 * lambda_max(d)
        fit = fused_lasso_fit(d, lam)
        jumps = np.flatnonzero(fit.beta[1:, 0]) + 1
        assert jumps.tolist() == [200]
        # two-level solution: each level moves toward the other by lam * N / (2 * 200)
        shrink = lam * 400 / (2 * 200)
        theta = fit.coefficients()[:, 0]
        np.testing.assert_allclose(theta[:200], shrink, atol=1e-9)
        np.testing.assert_allclose(theta[200:], 5.0 - shrink, atol=1e-9)
        assert objective(d.response, d.regressors, fit.beta, lam) == pytest.approx(
            lasso_oracle(d, lam), abs=1e-6)

    def test_kkt_and_objective_against_convex_solver(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(40, 90))
            p_lag = int(rng.integers(0, 3))
            x = rng.normal(size=n)
            x[n // 2:] += rng.uniform(0, 3)
            d = build_design(TimeSeries(x), p_lag=p_lag)
            lam = lambda_max(d) * rng.uniform(0.05, 0.8)
            fit = fused_lasso_fit(d, lam)
            assert kkt_violation(d, fit.beta, lam) <= 1e-6
            ours = objective(d.response, d.regressors, fit.beta, lam)
            assert ours <= lasso_oracle(d, lam) + 1e-6

    def test_objective_never_increases(self):
        for seed in range(20):
            x = shifted(seed, shift=2.0, n=200, at=120, phi=0.4)
            d = build_design(x, p_lag=1)
            fit = fused_lasso_fit(d, 0.05 * lambda_max(d))
            h = np.asarray(fit.objective_history)
            assert np.all(np.diff(h) <= 1e-12 * np.maximum(1.0, np.abs(h[:-1])))
            assert fit.converged

    def test_warm_start_same_solution(self):
        d = build_design(shifted(3, n=200, at=90, phi=0.3), p_lag=1)
        lam = 0.2 * lambda_max(d)
        cold = fused_lasso_fit(d, lam)
        warm = fused_lasso_fit(d, lam, init=fused_lasso_fit(d, 2 * lam).beta)
        o = [objective(d.response, d.regressors, f.beta, lam) for f in (cold, warm)]
        assert o[0] == pytest.approx(o[1], abs=1e-9)

    def test_bad_lambda(self):
        d = build_design(TimeSeries(np.arange(10.0)), p_lag=1)
        with pytest.raises(InvalidArgumentError):
            fused_lasso_fit(d, 0.0)


class TestSelectLambda:
    def test_single_value_grid(self):
        d = build_design(simulate(ar1(0.5), 100, seed=0), p_lag=1)
        assert select_lambda(d, DetectorConfig(lambda1_grid=(0.3,))) == 0.3

    def test_uninformative_validation_defers_to_smallest(self):
        x = gen_piecewise(PiecewiseSpec(((180, constant_model(0.0)), (20, constant_model(3.0)))))[0]
        cfg = DetectorConfig(p_lag=0, lambda1_grid=(1.0, 0.1, 0.01))
        assert select_lambda(build_design(x, 0), cfg) == 0.01

    def test_grid_order_irrelevant(self):
        d = build_design(shifted(4, n=200, at=100), p_lag=1)
        grid = (0.5, 0.05, 0.2, 0.01, 0.1)
        a = select_lambda(d, DetectorConfig(lambda1_grid=grid))
        b = select_lambda(d, DetectorConfig(lambda1_grid=tuple(sorted(grid))))
        assert a == b

    @pytest.mark.slow
    def test_stationary_picks_upper_half(self):
        cfg = DetectorConfig()
        upper = 0
        for seed in range(100):
            d = build_design(simulate(ar1(0.5), 600, seed=seed), cfg.p_lag, cfg.min_gap)
            grid = cfg.grid_for(d)
            lam = select_lambda(d, cfg)
            upper += int(np.argmin(np.abs(grid - lam))) < grid.size // 2
        assert upper >= 80

    @pytest.mark.slow
    def test_strong_break_admits_candidates(self):
        cfg = DetectorConfig()
        hits = 0
        for seed in range(100):
            d = build_design(shifted(seed), cfg.p_lag, cfg.min_gap)
            fit = fused_lasso_fit(d, select_lambda(d, cfg))
            hits += len(extract_candidates(fit, cfg)) >= 1
        assert hits >= 95


class TestExtractCandidates:
    def test_all_zero(self):
        assert len(extract_candidates(np.zeros((20, 2)), DetectorConfig())) == 0

    def test_cluster_keeps_larger(self):
        beta = np.zeros((40, 1))
        beta[0] = 9.0  # base block never counts
        beta[10], beta[13] = 0.5, -0.8
        cands = extract_candidates(beta, DetectorConfig(p_lag=0, min_gap=7))
        assert cands.indices == [13]

    def test_far_apart_both_kept(self):
        beta = np.zeros((40, 2))
        beta[5, 1], beta[30, 0] = 1.0, 1.0
        cands = extract_candidates(beta, DetectorConfig(p_lag=1, min_gap=7))
        assert cands.indices == [6, 31]

    def test_near_oracle(self):
        from psarima.synth import oracle_single_break
        cfg = DetectorConfig()
        x = shifted(7)
        best, _ = oracle_single_break(x, cfg.p_lag, cfg.min_gap)
        d = build_design(x, cfg.p_lag, cfg.min_gap)
        cands = extract_candidates(fused_lasso_fit(d, select_lambda(d, cfg)), cfg)
        assert any(abs(i - best) <= cfg.min_gap for i in cands.indices)


class TestScreen:
    def test_empty(self):
        res = screen(TimeSeries(np.zeros(50)), CandidateSet(()), DetectorConfig())
        assert res.breakpoints == () and res.log == ()

    def test_short_side_removed(self):
        x = shifted(0, n=200, at=100)
        res = screen(x, CandidateSet(((3, 1.0),)), DetectorConfig())
        assert res.breakpoints == () and res.log[0].verdict == "too-short"

    def test_log_fields(self):
        x = shifted(1, n=200, at=100)
        res = screen(x, CandidateSet(((98, 1.0),)), DetectorConfig())
        rec = res.log[0]
        assert rec.verdict == "kept" and rec.location in res.breakpoints
        assert rec.mse_with < rec.mse_without and rec.gain > 0.05
        assert rec.to_dict()["date"] == x.date_at(98).isoformat()

    @pytest.mark.slow
    def test_spurious_candidate_removed(self):
        removed = 0
        for seed in range(100):
            x = simulate(ar1(0.5), 600, seed=seed)
            res = screen(x, CandidateSet(((300, 1.0),)), DetectorConfig(screening_tau=0.05))
            removed += res.breakpoints == ()
        assert removed >= 90

    @pytest.mark.slow
    def test_real_shift_retained(self):
        kept = 0
        for seed in range(100):
            res = screen(shifted(seed), CandidateSet(((300, 1.0),)), DetectorConfig())
            kept += len(res.breakpoints) == 1 and abs(res.breakpoints[0] - 300) <= 10
        assert kept >= 95

    def test_tau_monotone(self):
        for seed in range(10):
            x = gen_piecewise(PiecewiseSpec(((150, ar1(0.3)), (150, ar1(0.6, mean=1.5)),
                                             (150, ar1(0.3, mean=-1.0))), seed=seed))[0]
            cands = CandidateSet(tuple((i, 1.0 / (1 + k)) for k, i in enumerate((60, 150, 230,
                                                                                  300, 380))))
            counts = [len(screen(x, cands, DetectorConfig(screening_tau=t)).breakpoints)
                      for t in (0.01, 0.03, 0.05, 0.1, 0.2, 0.5)]
            assert counts == sorted(counts, reverse=True)

    def test_cap(self):
        x = step_series(levels=(0, 5, 0, 5, 0), length=60)
        cands = CandidateSet(((60, 4.0), (120, 3.0), (180, 2.0), (240, 1.0)))
        res = screen(x.with_values(x.values + np.random.default_rng(0).normal(0, .1, x.n)),
                     cands, DetectorConfig(max_changepoints=2))
        assert res.breakpoints == (60, 120)
        assert sorted(r.verdict for r in res.log).count("capped") == 2


class TestSegments:
    def test_no_breaks_reduces_to_auto_fit(self):
        x = simulate(ar1(0.5), 300, seed=3)
        bounds = ArimaOrder(2, 0, 1)
        seg = fit_segments(x, [], bounds=bounds).segments
        ref = auto_fit(x, bounds)
        assert len(seg) == 1
        np.testing.assert_array_equal(seg[0].params(), ref.params())
        assert seg[0].whiteness is not None

    def test_dates_accepted(self):
        x = shifted(5, n=200, at=100)
        a = fit_segments(x, [100], bounds=ArimaOrder(1, 0, 0))
        b = fit_segments(x, [x.date_at(100)], bounds=ArimaOrder(1, 0, 0))
        assert a.break_indices == b.break_indices == (100,)
        assert a.breakpoints == (x.date_at(100),)

    def test_short_segment(self):
        with pytest.raises(InsufficientDataError):
            fit_segments(TimeSeries(np.arange(30.0)), [1])

    def test_failure_carries_partial(self, monkeypatch):
        import importlib
        detect_module = importlib.import_module("psarima.changepoint.detect")
        from psarima.errors import ConvergenceError
        calls = []

        def flaky(series, bounds=None, config=None):
            calls.append(series.n)
            if len(calls) == 2:
                raise ConvergenceError("no candidate order fitted")
            return auto_fit(series, bounds, config)

        monkeypatch.setattr(detect_module, "auto_fit", flaky)
        x = simulate(ar1(0.4), 80, seed=0)
        with pytest.raises(SegmentFitError) as info:
            fit_segments(x, [40], bounds=ArimaOrder(1, 0, 0))
        assert info.value.segment == 1 and len(info.value.partial) == 1

    @pytest.mark.slow
    def test_regime_coefficients_recovered(self):
        hits = 0
        for seed in range(100):
            x = gen_piecewise(PiecewiseSpec(((300, ar1(0.3)), (300, ar1(0.8))), seed=seed))[0]
            segs = fit_segments(x, [300], bounds=ArimaOrder(1, 0, 0)).segments
            phis = [s.phi[0] if s.order.p else 0.0 for s in segs]
            hits += abs(phis[0] - 0.3) <= 0.1 and abs(phis[1] - 0.8) <= 0.1
        assert hits >= 90


class TestDetect:
    def test_oracle_agreement_noiseless(self):
        from psarima.synth import oracle_single_break
        cfg = DetectorConfig(p_lag=0)
        for k in range(20):
            at = 40 + 7 * k
            x = gen_piecewise(PiecewiseSpec(((at, constant_model(1.0)),
                                             (300 - at, constant_model(1.0 + 0.5 * (k + 1))))))[0]
            model = detect(x, cfg, bounds=ArimaOrder(0, 0, 0))
            assert model.break_indices == (oracle_single_break(x, 0, cfg.min_gap)[0],)

    def test_deterministic(self):
        x = shifted(11, shift=3.0, phi=0.5)
        bounds = ArimaOrder(1, 0, 1)
        a = detect(x, bounds=bounds).to_json()
        b = detect(x, bounds=bounds).to_json()
        assert a == b

    def test_grid_permutation_invariant(self):
        x = shifted(12, shift=3.0, n=300, at=150)
        grid = tuple(np.geomspace(1.0, 0.01, 12))
        a = detect(x, DetectorConfig(lambda1_grid=grid), bounds=ArimaOrder(1, 0, 0))
        b = detect(x, DetectorConfig(lambda1_grid=grid[::-1]), bounds=ArimaOrder(1, 0, 0))
        assert a.to_json() == b.to_json()

    def test_report_layout(self):
        x = shifted(13, n=300, at=150)
        doc = detect(x, bounds=ArimaOrder(1, 0, 0)).to_dict()
        assert doc["breakpoints"] == [x.date_at(150).isoformat()] or len(doc["breakpoints"]) == 1
        assert len(doc["segments"]) == len(doc["breakpoints"]) + 1

    def test_whiteness_lags_reach_segments(self):
        x = shifted(3, shift=4.0, n=200, at=100, phi=0.4)
        model = fit_segments(x, [100], bounds=ArimaOrder(1, 0, 0), whiteness_lags=6)
        assert all(m.whiteness.lags_used == 6 for m in model.segments)
        with pytest.raises(InvalidArgumentError):
            DetectorConfig(whiteness_lags=0)

    def test_null_consistency(self):
        for seed in range(5):
            x = shifted(seed, shift=4.0, n=200, at=100, phi=0.4)
            top = lambda_max(build_design(x, 1, 7))
            cfg = DetectorConfig(lambda1_grid=(top * 1.001, top * 3.0))
            model = detect(x, cfg, bounds=ArimaOrder(1, 0, 0))
            assert model.break_indices == () and len(model.segments) == 1

    def test_config_validation(self):
        with pytest.raises(InvalidArgumentError):
            DetectorConfig(min_gap=1, p_lag=1)
        with pytest.raises(InvalidArgumentError):
            DetectorConfig(screening_tau=0.0)
        with pytest.raises(InvalidArgumentError):
            DetectorConfig(lambda1_grid=(0.1, 0.1))
