import json

import numpy as np
import pytest

from psarima.arima import ArimaModel, ArimaOrder, simulate
from psarima.errors import InsufficientDataError, InvalidArgumentError, InvalidModelError
from psarima.series import acf
from psarima.synth import PiecewiseSpec, constant_model, gen_piecewise, oracle_single_break

from conftest import ar1, white


class TestGenPiecewise:
    def test_single_segment_matches_simulate(self):
        m = ar1(0.4, mean=2.0)
        x, breaks = gen_piecewise(PiecewiseSpec(((250, m),), seed=17))
        assert breaks == []
        np.testing.assert_array_equal(x.values, simulate(m, 250, seed=17).values)

    def test_noiseless_step(self):
        x, breaks = gen_piecewise(PiecewiseSpec(((30, constant_model(0.0)), (40, constant_model(5.0)))))
        assert breaks == [30]
        np.testing.assert_array_equal(x.values, [0.0] * 30 + [5.0] * 40)

    def test_reproducible(self):
        spec = PiecewiseSpec(((100, ar1(0.3)), (100, ar1(0.8))), seed=5)
        assert gen_piecewise(spec)[0].values.tobytes() == gen_piecewise(spec)[0].values.tobytes()

    def test_non_causal_segment(self):
        bad = ArimaModel(ArimaOrder(1, 0, 0), phi=[1.1])
        with pytest.raises(InvalidModelError):
            gen_piecewise(PiecewiseSpec(((50, white()), (50, bad))))

    def test_short_segment(self):
        with pytest.raises(InvalidArgumentError):
            PiecewiseSpec(((5, white()),))

    def test_json_spec(self):
        doc = {"seed": 3, "start_date": "2020-01-01",
               "segments": [{"length": 40, "model": white().to_dict()},
                            {"length": 60, "model": ar1(0.5, mean=1.0).to_dict()}]}
        spec = PiecewiseSpec.from_json(json.dumps(doc))
        assert spec.length == 100 and spec.breaks == [40]
        assert spec.segments[1][1].phi[0] == 0.5

    @pytest.mark.slow
    def test_regimes_visible_in_lag_one(self):
        hits = 0
        for seed in range(100):
            x, _ = gen_piecewise(PiecewiseSpec(((300, ar1(0.3)), (300, ar1(0.8))), seed=seed))
            hits += acf(x.slice(0, 300), 1)[1] < acf(x.slice(300, 600), 1)[1]
        assert hits >= 95


class TestOracle:
    def test_noiseless_step(self):
        x, _ = gen_piecewise(PiecewiseSpec(((37, constant_model(1.0)), (63, constant_model(4.0)))))
        m, gain = oracle_single_break(x, p_lag=0)
        assert m == 37 and gain == pytest.approx(1.0)

    def test_brute_force_definition(self, rng):
        x = rng.normal(size=40)
        x[25:] += 1.0
        m, _ = oracle_single_break(x, p_lag=1, min_gap=5)

        def sse(seg):
            z = np.column_stack([np.ones(seg.size - 1), seg[:-1]])
            r = seg[1:] - z @ np.linalg.lstsq(z, seg[1:], rcond=None)[0]
            return r @ r

        costs = {k: sse(x[:k]) + sse(x[k:]) for k in range(5, 36)}
        assert m == min(costs, key=costs.get)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            oracle_single_break(np.zeros(10), p_lag=1, min_gap=7)

    @pytest.mark.slow
    def test_null_gain_small(self):
        small = sum(oracle_single_break(simulate(white(), 400, seed=s), 1, 7)[1] < 0.05
                    for s in range(100))
        assert small >= 90

    @pytest.mark.slow
    def test_shift_located(self):
        close = 0
        for seed in range(100):
            x, _ = gen_piecewise(PiecewiseSpec(((300, white()), (300, white(mean=5.0))), seed=seed))
            close += abs(oracle_single_break(x, 1, 7)[0] - 300) <= 5
        assert close >= 95
