import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualirs.analysis import LinkDistances, double_gain_closed_form
from dualirs.beamforming import EffectiveChannel
from dualirs.channel import PropagationParams
from dualirs.experiments import (
    McResult,
    ScenarioConfig,
    build_panels,
    double_link,
    exact_double_snr,
    exact_single_snr,
    fmt_db,
    fmt_tau,
    received_snr,
    run_crossover_search,
    run_doubling_deltas,
    run_rician_study,
    run_split_sweep,
    single_panel,
    snr_db,
    summarize_trials,
)
from dualirs.geometry import GeometryError, point_to_panel_distances

from conftest import BS, USER, irs1_panel, irs2_panel


class TestSnr:
    def test_unit_gain(self):
        assert received_snr(EffectiveChannel(1.0), 43, -60) == pytest.approx(103, abs=1e-12)

    def test_reference_double(self, scenario):
        g = double_gain_closed_form(800, 800, scenario.link_distances(), scenario.prop.alpha)
        assert snr_db(g, 43, -60) == pytest.approx(16.34, abs=5e-3)

    def test_reference_single(self, scenario):
        link = scenario.link_distances()
        g = scenario.prop.alpha**2 * 1600**2 / (link.d_s * link.d_r) ** 2
        assert snr_db(g, 43, -60) == pytest.approx(10.72, abs=5e-3)

    @given(st.complex_numbers(min_magnitude=1e-8, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
           st.floats(-30, 60), st.floats(-120, -40))
    def test_linear_consistency(self, h, p_dbm, n_dbm):
        db = received_snr(EffectiveChannel(h), p_dbm, n_dbm)
        linear = 10 ** (p_dbm / 10) * abs(h) ** 2 / 10 ** (n_dbm / 10)
        assert 10 ** (db / 10) == pytest.approx(linear, rel=1e-12)

    def test_zero_channel(self):
        assert received_snr(EffectiveChannel(0j), 43, -60) == -math.inf


class TestScenario:
    def test_shipped_distances(self, scenario):
        assert scenario.link_distances() == LinkDistances(1.0, 100.0, 15.0)
        geo = scenario.geometric_link()
        assert geo.d_t == pytest.approx(1.00344, abs=1e-5)
        assert geo.d_r == pytest.approx(15.0083, abs=1e-4)

    def test_rejects_coincident_bs(self, prop):
        with pytest.raises(GeometryError):
            ScenarioConfig((0, 0, 0), USER, irs1_panel(), irs2_panel(), prop)

    def test_rejects_nonfinite_power(self, prop):
        with pytest.raises(ValueError):
            ScenarioConfig(BS, USER, irs1_panel(), irs2_panel(), prop, tx_power_dbm=math.inf)

    def test_digest_stable(self, scenario, prop):
        a = ScenarioConfig(BS, USER, irs1_panel(), irs2_panel(), prop)
        b = ScenarioConfig(BS, USER, irs1_panel(), irs2_panel(), PropagationParams(0.06))
        assert a.digest() == b.digest()
        assert a.digest() != scenario.digest()


def test_build_panels(scenario):
    a, b = build_panels(scenario, 800, 7)
    assert (a.count_a, a.count_b) == (25, 32)
    assert (b.count_a, b.count_b) == (1, 7)
    assert a.anchor == scenario.irs1.anchor and b.dir_a == scenario.irs2.dir_a
    s = single_panel(scenario, 1600)
    assert (s.count_a, s.count_b, s.anchor) == (40, 40, scenario.irs2.anchor)
    with pytest.raises(ValueError):
        build_panels(scenario, 0, 3)


class TestExactLink:
    def test_small_link_near_closed_form(self, scenario):
        # 2x2 panels: elements sit up to 3 cm closer to the BS than the 1 m anchor
        # distance, which the anchor-based closed form does not see
        link = scenario.geometric_link()
        closed = snr_db(double_gain_closed_form(4, 4, link, scenario.prop.alpha), 43, -60)
        assert exact_double_snr(scenario, 4, 4) == pytest.approx(closed, abs=0.1)

    def test_margin(self, scenario):
        assert double_link(scenario, 800, 800).margin == pytest.approx(235.7, abs=0.05)

    def test_single_is_coherent_sum(self, scenario):
        s = exact_single_snr(scenario, 100)
        panel = single_panel(scenario, 100)
        a = math.sqrt(scenario.prop.alpha)
        amp = np.sum(a / point_to_panel_distances(BS, panel) * a / point_to_panel_distances(USER, panel))
        assert s == pytest.approx(103 + 20 * math.log10(amp), abs=1e-9)


@pytest.fixture(scope="module")
def sweep800(scenario):
    return run_split_sweep(scenario, 800, 100, seed=5)


class TestSweep:
    def test_rows(self, sweep800):
        assert [r.k1 for r in sweep800.rows] == list(range(100, 800, 100))
        assert all(r.k1 + r.k2 == 800 for r in sweep800.rows)

    def test_closed_form_symmetric(self, sweep800):
        by_k1 = {r.k1: r.snr_closed_db for r in sweep800.rows}
        for k1 in by_k1:
            assert by_k1[k1] == pytest.approx(by_k1[800 - k1], abs=1e-12)

    def test_best(self, sweep800):
        assert sweep800.best().k1 == 400

    def test_tracking_tolerance(self, sweep800):
        gap = sweep800.max_closed_form_gap()
        assert 0 < gap < 1.5
        assert sweep800.tracks_closed_form() and not sweep800.tracks_closed_form(gap / 2)

    def test_single_constant(self, sweep800):
        assert len({r.snr_single_db for r in sweep800.rows}) == 1

    def test_csv_rows(self, sweep800):
        rows = list(sweep800.csv_rows())
        assert len(rows[0]) == len(sweep800.CSV_HEADER)
        assert rows[0][:2] == (100, 700)

    def test_workers_identical(self, scenario, sweep800):
        again = run_split_sweep(scenario, 800, 100, seed=5, workers=3)
        assert list(again.csv_rows()) == list(sweep800.csv_rows())

    @pytest.mark.parametrize("K, step", [(1, 1), (10, 0), (10, 10)])
    def test_rejects(self, scenario, K, step):
        with pytest.raises(ValueError):
            run_split_sweep(scenario, K, step)


class TestSummarize:
    def test_constant_sequence(self, scenario):
        res = summarize_trials(np.full(7, 3.3e-9), math.inf, "double", scenario)
        assert res.mean_snr_db == snr_db(3.3e-9, 43, -60)
        assert res.std_err_db == 0.0

    def test_single_trial(self, scenario):
        assert math.isnan(summarize_trials([1e-9], 1.0, "double", scenario).std_err_db)

    def test_linear_mean(self, scenario):
        res = summarize_trials([1e-9, 3e-9], 1.0, "single", scenario, keep=True)
        assert res.mean_snr_db == pytest.approx(snr_db(2e-9, 43, -60), abs=1e-12)
        lin = 10 ** (res.trial_snr_db / 10)
        assert 10 * math.log10(lin.mean()) == pytest.approx(res.mean_snr_db, abs=1e-12)

    def test_csv_row(self):
        row = McResult(math.inf, 3, 16.3412987, 0.0, "double").csv_row()
        assert row == ("inf", 3, "16.3413", "0", "double")


class TestRician:
    @pytest.fixture(scope="class")
    @staticmethod
    def small(scenario):
        return run_rician_study(scenario, 16, 16, [math.inf, 3.0, 0.0], 40, seed=11, keep_trials=True)

    def test_layout(self, small):
        assert [(r.tau, r.case) for r in small] == [
            (math.inf, "double"), (math.inf, "single"),
            (3.0, "double"), (3.0, "single"),
            (0.0, "double"), (0.0, "single"),
        ]
        assert all(r.trials == 40 for r in small)

    def test_los_limit_exact(self, scenario, small):
        assert small[0].mean_snr_db == exact_double_snr(scenario, 16, 16)
        assert small[1].mean_snr_db == exact_single_snr(scenario, 32)
        assert small[0].std_err_db == 0.0 and small[1].std_err_db == 0.0

    def test_fading_spreads(self, small):
        assert small[2].std_err_db > 0 and np.ptp(small[4].trial_snr_db) > 0

    def test_trial_consistency(self, small):
        for res in small:
            lin = np.mean(10 ** (res.trial_snr_db / 10))
            assert 10 * math.log10(lin) == pytest.approx(res.mean_snr_db, abs=1e-9)

    def test_workers_and_order_independent(self, scenario, small):
        again = run_rician_study(scenario, 16, 16, [0.0, 3.0], 40, seed=11, workers=4, keep_trials=True)
        assert np.array_equal(again[0].trial_snr_db, small[4].trial_snr_db)
        assert np.array_equal(again[3].trial_snr_db, small[3].trial_snr_db)

    def test_seed_matters(self, scenario, small):
        other = run_rician_study(scenario, 16, 16, [3.0], 40, seed=12)
        assert other[0].mean_snr_db != small[2].mean_snr_db

    @pytest.mark.parametrize("taus, trials", [([-1.0], 5), ([math.nan], 5), ([1.0], 0)])
    def test_rejects(self, scenario, taus, trials):
        with pytest.raises(ValueError):
            run_rician_study(scenario, 4, 4, taus, trials, seed=0)


class TestDoubling:
    def test_small(self, scenario):
        # 8x8 -> 16x16 single panel and 2x4 -> 4x4 per IRS keep the grids square-ish
        res = run_doubling_deltas(scenario, 16)
        assert res.delta_double_db == pytest.approx(40 * math.log10(2), abs=0.05)
        assert res.delta_single_db == pytest.approx(20 * math.log10(2), abs=0.05)
        rows = list(res.csv_rows())
        assert [r[0] for r in rows] == ["double", "single"]
        assert rows[0][1:3] == (16, 32)

    @pytest.mark.parametrize("k", [0, 7])
    def test_rejects(self, scenario, k):
        with pytest.raises(ValueError):
            run_doubling_deltas(scenario, k)


class TestCrossover:
    def test_boundary(self, scenario):
        res = run_crossover_search(scenario, 1200, 1300, step=50 * 2)
        assert res.found and res.at_boundary and res.k_star == 1200.0

    def test_not_found(self, scenario):
        res = run_crossover_search(scenario, 100, 300, step=100)
        assert not res.found and res.k_star is None
        assert [r[0] for r in res.rows] == [100, 200, 300]

    def test_interpolation_bracket(self, scenario):
        res = run_crossover_search(scenario, 700, 1000, step=100)
        assert res.found and not res.at_boundary
        ks = [r[0] for r in res.rows]
        diffs = [d - s for _, d, s in res.rows]
        first = next(i for i, d in enumerate(diffs) if d >= 0)
        assert ks[first - 1] <= res.k_star <= ks[first]

    def test_odd_kmin_rounds_up(self, scenario):
        res = run_crossover_search(scenario, 101, 105, step=2)
        assert [r[0] for r in res.rows] == [102, 104]

    def test_rejects_odd_step(self, scenario):
        with pytest.raises(ValueError):
            run_crossover_search(scenario, 600, 700, step=5)


def test_formatting():
    assert fmt_db(16.3412987) == "16.3413"
    assert fmt_db(-86.66170001) == "-86.6617"
    assert fmt_db(math.nan) == "nan"
    assert fmt_db(-math.inf) == "-inf"
    assert fmt_tau(math.inf) == "inf" and fmt_tau(3.0) == "3"
