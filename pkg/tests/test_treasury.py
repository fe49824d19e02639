import numpy as np
import pytest

from dfmm.errors import BadRate, BadRates, NegativeReserveInvariantBreach
from dfmm.ledger import AssetPool
from dfmm.money import to_units
from dfmm.pricing import FeeSchedule
from dfmm.treasury import (
    PLP,
    SLP_LONG,
    SLP_SHORT,
    RewardLedger,
    TreasuryReserve,
    discrepancy,
    rebalancing_fee,
    reward_accrue,
    reward_distribute,
    treasury_update,
)
from dfmm.vaults import LONG, SHORT, Vault, VaultPair


def pair(c_long, c_short, rate=0.5):
    floor = to_units(0.0)
    return VaultPair(
        long=Vault("X", LONG, to_units(c_long), rate, floor),
        short=Vault("X", SHORT, to_units(c_short), rate, floor),
    )


class TestDiscrepancy:
    def test_frozen_params_zero(self):
        assert discrepancy(10.0, 5.0, 5.0, 0.1) == 0.0

    def test_reverse_dutch_costs(self):
        assert discrepancy(10.0, 5.0, 7.0, 0.1) == pytest.approx(2.0)

    def test_dutch_earns(self):
        assert discrepancy(10.0, 7.0, 5.0, 0.1) == pytest.approx(-2.0)

    def test_sign_law(self):
        rng = np.random.default_rng(43)
        for _ in range(300):
            t = float(rng.uniform(-50, 50))
            if t == 0:
                continue
            a_prev = float(rng.uniform(0, 20))
            a_next = float(rng.uniform(0, 20))
            d = float(rng.uniform(1e-6, 1.0))
            ups = discrepancy(t, a_prev, a_next, d)
            if a_next > a_prev:
                assert ups > 0
            elif a_next < a_prev:
                assert ups < 0
            else:
                assert ups == 0


class TestFeesAndRewards:
    def test_zero_rate(self):
        assert rebalancing_fee(1000.0, 0.0) == 0.0

    def test_fee_value(self):
        assert rebalancing_fee(1000.0, 0.001) == pytest.approx(1.0)

    def test_unit_rate_rejected(self):
        with pytest.raises(BadRate):
            rebalancing_fee(1000.0, 1.0)

    def test_reward_all_to_treasury(self):
        fees = FeeSchedule(theta=0.003, xi=0.003)
        assert reward_accrue(100.0, fees) == pytest.approx(0.0)

    def test_reward_value(self):
        fees = FeeSchedule(theta=0.003, xi=0.001)
        assert reward_accrue(100.0, fees) == pytest.approx(0.2)

    def test_xi_above_theta_rejected(self):
        with pytest.raises(ValueError):
            FeeSchedule(theta=0.001, xi=0.002)


class TestTreasuryUpdate:
    def test_fee_then_cost(self):
        res = TreasuryReserve()
        treasury_update(res, xi_delta_units=to_units(5.0))
        treasury_update(res, upsilon_delta_units=to_units(2.0))
        assert res.balance == pytest.approx(3.0)
        assert res.balance_units == res.cum_xi_units - res.cum_upsilon_units

    def test_negative_upsilon_adds(self):
        res = TreasuryReserve()
        treasury_update(res, upsilon_delta_units=-to_units(2.0))
        assert res.balance == pytest.approx(2.0)

    def test_uncapped_overdraw_is_fatal(self):
        res = TreasuryReserve()
        treasury_update(res, xi_delta_units=to_units(3.0))
        with pytest.raises(NegativeReserveInvariantBreach):
            treasury_update(res, upsilon_delta_units=to_units(4.0))

    def test_identity_over_random_flows(self):
        rng = np.random.default_rng(47)
        res = TreasuryReserve()
        for _ in range(1000):
            treasury_update(res, xi_delta_units=int(rng.integers(0, 10**12)))
            affordable = res.balance_units
            treasury_update(
                res, upsilon_delta_units=int(rng.integers(-(10**12), affordable + 1))
            )
            assert res.balance_units == res.cum_xi_units - res.cum_upsilon_units
            assert res.balance_units >= 0


class TestRewardDistribute:
    def test_balanced_capacity_equal_thirds(self):
        pool = AssetPool("X", 100.0, 100.0)
        vaults = pair(50.0, 50.0)  # capacities 100 each: all shares 1/3
        accrued = to_units(9.0)
        shares = reward_distribute(pool, vaults, accrued)
        assert shares.total_units == accrued
        assert shares.plp_units == pytest.approx(accrued / 3, abs=2)
        assert shares.slp_long_units == pytest.approx(accrued / 3, abs=2)

    def test_plp_overweight_pays_gamma_split(self):
        pool = AssetPool("X", 200.0, 200.0)
        vaults = pair(25.0, 25.0)  # capacities 50: pLP share 2/3
        accrued = to_units(300.0)
        shares = reward_distribute(pool, vaults, accrued, gamma=0.03)
        assert shares.total_units == accrued
        third = accrued / 3
        assert shares.plp_units < third
        assert shares.slp_long_units > third
        assert shares.slp_short_units > third
        assert shares.slp_long_units == shares.slp_short_units

    def test_zero_accrued(self):
        shares = reward_distribute(AssetPool("X", 1.0, 1.0), pair(1.0, 1.0), 0)
        assert shares.as_dict() == {PLP: 0, SLP_LONG: 0, SLP_SHORT: 0}

    def test_simplex_over_random_states(self):
        rng = np.random.default_rng(59)
        for _ in range(300):
            pool = AssetPool("X", float(rng.uniform(0, 500)), float(rng.uniform(0, 500)))
            vaults = pair(float(rng.uniform(0, 200)), float(rng.uniform(0, 200)))
            accrued = int(rng.integers(0, 10**14))
            gamma = float(rng.uniform(0.0, 0.5))
            shares = reward_distribute(pool, vaults, accrued, gamma=gamma)
            assert shares.total_units == accrued
            assert shares.plp_units >= 0
            assert shares.slp_long_units >= 0
            assert shares.slp_short_units >= 0


class TestRewardLedger:
    def test_accrue_distribute_claims(self):
        ledger = RewardLedger()
        ledger.accrue("X", to_units(9.0))
        pool = AssetPool("X", 100.0, 100.0)
        shares = reward_distribute(pool, pair(50.0, 50.0), ledger.pending_units("X"))
        ledger.distribute("X", shares)
        rows = ledger.claims()
        assert {r[2] for r in rows} == {PLP, SLP_LONG, SLP_SHORT}
        assert sum(r[3] for r in rows) == pytest.approx(9.0)

    def test_mismatched_distribution_rejected(self):
        ledger = RewardLedger()
        ledger.accrue("X", 100)
        from dfmm.treasury import RewardShares

        with pytest.raises(BadRates):
            ledger.distribute("X", RewardShares(10, 10, 10))
