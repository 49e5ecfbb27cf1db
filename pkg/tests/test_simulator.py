import json
import math

import numpy as np
import pytest

from ancillary_pricing.core import PriceGrid
from ancillary_pricing.errors import CalibrationDiverged
from ancillary_pricing.policies import RandomDiscountParams, StaticPricePolicy
from ancillary_pricing.session_io import session_to_dict
from ancillary_pricing.simulator import (
    AbConfig,
    ArmSpec,
    MarketSpec,
    SubMarket,
    calibrate,
    default_market_spec,
    export_sessions,
    gen_session,
    market_spec_from_doc,
    market_spec_to_doc,
    run_abtest,
    session_stream,
    simulate_decision,
)

GRID = PriceGrid((30.0, 40.0, 50.0))


def _flat_spec(base=math.log(50.0), std=0.0, los_bonus=0.0, **kwargs) -> MarketSpec:
    sub = SubMarket(name="only", markets=(("AAA", "BBB"),), weight=1.0,
                    wtp_log_mean=base, wtp_log_std=std, los_bonus=los_bonus, **kwargs)
    return MarketSpec(sub_markets=(sub,), static_price=50.0,
                      booking_class_bumps={})


class TestGenSession:
    def test_no_effects_no_noise_exact_wtp(self):
        spec = _flat_spec(base=3.2)
        for i in range(20):
            sim = gen_session(spec, session_stream(1, i))
            assert sim.wtp == math.exp(3.2)

    def test_los_bonus_scales_wtp_multiplicatively(self):
        plain = _flat_spec(base=3.0)
        boosted = _flat_spec(base=3.0, los_bonus=0.4)
        found = 0
        for i in range(300):
            a = gen_session(plain, session_stream(2, i))
            b = gen_session(boosted, session_stream(2, i))
            los_norm = a.record.length_of_stay / plain.los_max
            if 0.05 <= los_norm <= 0.3:
                assert b.wtp == pytest.approx(a.wtp * math.exp(0.4))
                assert b.wtp > a.wtp
                found += 1
            else:
                assert b.wtp == a.wtp
        assert found > 10

    def test_covariates_within_ranges(self):
        spec = default_market_spec()
        for i in range(100):
            s = gen_session(spec, session_stream(3, i)).record
            assert 0 <= s.days_to_departure <= spec.dtd_max
            assert 0 <= s.length_of_stay <= spec.los_max
            assert s.group_size >= 1
            assert 0 <= s.num_stops <= 2
            assert s.booking_class in ("business", "economy", "flex")
            assert s.price_offered == spec.static_price
            assert s.purchased is None
            assert "route_popularity" in s.extra_features

    def test_deterministic_per_stream(self):
        spec = default_market_spec()
        a = gen_session(spec, session_stream(9, 4))
        b = gen_session(spec, session_stream(9, 4))
        assert a.wtp == b.wtp
        assert a.record == b.record


class TestSimulateDecision:
    def test_above_wtp_declines(self):
        spec = _flat_spec(base=math.log(40.0))
        sim = gen_session(spec, session_stream(0, 0))
        assert simulate_decision(sim, 40.0 + 1e-9) == 0

    def test_boundary_purchases(self):
        spec = _flat_spec(base=math.log(40.0))
        sim = gen_session(spec, session_stream(0, 0))
        assert simulate_decision(sim, sim.wtp) == 1

    def test_monotone_in_price(self):
        spec = default_market_spec()
        sweep = np.linspace(10.0, 80.0, 30)
        for i in range(200):
            sim = gen_session(spec, session_stream(5, i))
            decisions = [simulate_decision(sim, p) for p in sweep]
            assert all(b <= a for a, b in zip(decisions, decisions[1:]))


class TestCalibrate:
    def test_median_threshold(self):
        spec = _flat_spec(base=1.0, std=0.5)
        calibrated = calibrate(spec, target_rate=0.5, n=40_000, seed=2)
        assert calibrated.sub_markets[0].wtp_log_mean == pytest.approx(
            math.log(50.0), abs=0.05)

    def test_hits_target_on_fresh_sample(self):
        spec = calibrate(default_market_spec(), target_rate=0.06, n=30_000, seed=1)
        hits = sum(
            simulate_decision(gen_session(spec, session_stream(77, i)), 50.0)
            for i in range(30_000)
        )
        assert abs(hits / 30_000 - 0.06) < 0.01

    def test_deterministic(self):
        spec = default_market_spec()
        c1 = calibrate(spec, target_rate=0.1, n=5_000, seed=3)
        c2 = calibrate(spec, target_rate=0.1, n=5_000, seed=3)
        assert c1 == c2

    def test_degenerate_market_diverges(self):
        spec = _flat_spec(base=3.0, std=0.0)  # every WTP identical
        with pytest.raises(CalibrationDiverged):
            calibrate(spec, target_rate=0.5, n=2_000, seed=0)

    def test_bad_target_rejected(self):
        with pytest.raises(CalibrationDiverged):
            calibrate(default_market_spec(), target_rate=1.5, n=100, seed=0)


class TestExportSessions:
    def test_empty(self):
        assert export_sessions(default_market_spec(), 0, seed=0) == []

    def test_same_seed_identical(self):
        spec = default_market_spec()
        a = export_sessions(spec, 50, seed=4)
        b = export_sessions(spec, 50, seed=4)
        assert a == b

    def test_labels_realized_and_wtp_stripped(self):
        spec = default_market_spec()
        sessions = export_sessions(spec, 50, seed=5)
        for s in sessions:
            assert s.purchased in (0, 1)
            assert not hasattr(s, "wtp")
            assert "wtp" not in json.dumps(session_to_dict(s)).lower()

    def test_price_noise_spreads_offers(self):
        spec = default_market_spec()
        noise = RandomDiscountParams(mean_discount=10.0, std_discount=6.0,
                                     static_price=spec.static_price)
        sessions = export_sessions(spec, 300, seed=6, price_noise=noise, grid=GRID)
        prices = {s.price_offered for s in sessions}
        assert len(prices) > 100
        assert all(GRID.p_min <= p <= GRID.p_max for p in prices)

    def test_price_noise_requires_grid(self):
        noise = RandomDiscountParams(10.0, 6.0, 50.0)
        with pytest.raises(ValueError):
            export_sessions(default_market_spec(), 10, seed=0, price_noise=noise)


def _human_arm(name, price, split):
    return ArmSpec(name=name, policy=StaticPricePolicy(price=price, grid=GRID), split=split)


class TestRunAbtest:
    def test_symmetric_human_arms(self):
        spec = calibrate(default_market_spec(), 0.06, n=10_000, seed=0)
        config = AbConfig(
            arms=(_human_arm("H1", 50.0, 0.5), _human_arm("H2", 50.0, 0.5)),
            days=10, sessions_per_day=2_000, seed=12, baseline_arm="H1",
        )
        result = run_abtest(spec, config)
        c1 = result.report.arm_rows["H1"].conversion
        c2 = result.report.arm_rows["H2"].conversion
        n_arm = result.report.arm_rows["H1"].offers
        se = math.sqrt(2 * 0.06 * 0.94 / n_arm)
        assert abs(c1 - c2) <= 4 * se

    def test_cheaper_arm_converts_at_least_as_much(self):
        spec = calibrate(default_market_spec(), 0.06, n=10_000, seed=0)
        config = AbConfig(
            arms=(_human_arm("LOW", GRID.p_min, 0.5), _human_arm("HIGH", GRID.p_max, 0.5)),
            days=5, sessions_per_day=2_000, seed=3,
        )
        result = run_abtest(spec, config)
        assert (result.report.arm_rows["LOW"].conversion
                >= result.report.arm_rows["HIGH"].conversion)

    def test_fully_deterministic(self):
        spec = default_market_spec()
        config = AbConfig(
            arms=(_human_arm("A", 40.0, 0.6), _human_arm("B", 50.0, 0.4)),
            days=4, sessions_per_day=200, seed=21, sessions_per_day_dist="poisson",
        )
        r1 = run_abtest(spec, config)
        r2 = run_abtest(spec, config)
        assert r1.daily == r2.daily
        assert r1.report.to_json() == r2.report.to_json()

    def test_routing_fractions_converge(self):
        spec = default_market_spec()
        splits = (0.2, 0.5, 0.3)
        config = AbConfig(
            arms=tuple(_human_arm(f"A{i}", 50.0, s) for i, s in enumerate(splits)),
            days=1, sessions_per_day=100_000, seed=8,
        )
        result = run_abtest(spec, config)
        total = sum(row.offers for row in result.report.arm_rows.values())
        assert total == 100_000
        for i, s in enumerate(splits):
            frac = result.report.arm_rows[f"A{i}"].offers / total
            se = math.sqrt(s * (1 - s) / total)
            assert abs(frac - s) <= 3 * se

    def test_baseline_normalization(self):
        spec = calibrate(default_market_spec(), 0.1, n=10_000, seed=0)
        config = AbConfig(
            arms=(_human_arm("HUMAN", 50.0, 0.5), _human_arm("CHEAP", 30.0, 0.5)),
            days=3, sessions_per_day=1_000, seed=5,
        )
        result = run_abtest(spec, config)
        assert result.report.arm_rows["HUMAN"].revenue_per_offer_normalized == pytest.approx(1.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AbConfig(arms=(_human_arm("A", 50.0, 1.0),), days=1, sessions_per_day=10)
        with pytest.raises(ValueError):
            AbConfig(arms=(_human_arm("A", 50.0, 0.6), _human_arm("B", 50.0, 0.6)),
                     days=1, sessions_per_day=10)


class TestSpecSerialization:
    def test_round_trip(self):
        spec = default_market_spec()
        assert market_spec_from_doc(market_spec_to_doc(spec)) == spec

    def test_weights_validated(self):
        doc = market_spec_to_doc(default_market_spec())
        doc["sub_markets"][0]["weight"] = 0.9
        with pytest.raises(ValueError):
            market_spec_from_doc(doc)
