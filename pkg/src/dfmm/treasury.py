"""Treasury reserve, auction discrepancies, and reward distribution.

The reserve accumulates the rebalancing fee slice of every trade and
funds the discrepancies created when the auction moves aggressiveness
with flow open. Its balance always equals cumulative fees minus
cumulative discrepancies, exactly, and the auction cap keeps it
nonnegative; a negative balance is a fatal engine bug, not a market
condition. Trade rewards (fee minus the treasury slice) are split
between the pLP class and the two sLP vault classes, starting from equal
thirds and corrected toward balanced capacity shares.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import BadRate, BadRates, NegativeReserveInvariantBreach
from .ledger import AssetPool
from .money import from_units, to_units
from .pricing import FeeSchedule, RebalanceParams, premium_fn
from .vaults import VaultPair

PLP = "plp"
SLP_LONG = "slp_long"
SLP_SHORT = "slp_short"
CLASSES = (PLP, SLP_LONG, SLP_SHORT)


def discrepancy(t_open: float, a_prev: float, a_next: float, d: float) -> float:
    """Premium change at the open flow when aggressiveness moves.

    Positive when aggressiveness rose (a protocol cost: traders were
    charged at the old scale but rebates accrue at the new one), negative
    when it fell.
    """
    params_prev = RebalanceParams(a_rhs=a_prev, a_lhs=a_prev, d_rhs=d, d_lhs=d)
    params_next = RebalanceParams(a_rhs=a_next, a_lhs=a_next, d_rhs=d, d_lhs=d)
    return premium_fn(t_open, params_next) - premium_fn(t_open, params_prev)


def rebalancing_fee(v: float, xi: float) -> float:
    """Treasury slice of a trade's gross notional."""
    if not (0.0 <= xi < 1.0):
        raise BadRate(f"xi must be in [0, 1), got {xi}")
    return v * xi


def reward_accrue(v: float, fees: FeeSchedule) -> float:
    """Reward pool contribution of a trade: notional times (theta - xi)."""
    if fees.xi > fees.theta:
        raise BadRates(f"xi {fees.xi} exceeds theta {fees.theta}")
    return v * (fees.theta - fees.xi)


@dataclass
class TreasuryReserve:
    balance_units: int = 0
    cum_xi_units: int = 0
    cum_upsilon_units: int = 0

    @property
    def balance(self) -> float:
        return from_units(self.balance_units)


def treasury_update(
    reserve: TreasuryReserve, xi_delta_units: int = 0, upsilon_delta_units: int = 0
) -> TreasuryReserve:
    """Book a fee inflow and/or a discrepancy against the reserve.

    Keeps balance == cum_xi - cum_upsilon exactly. A negative resulting
    balance means the auction cap failed and is raised as fatal.
    """
    reserve.cum_xi_units += xi_delta_units
    reserve.cum_upsilon_units += upsilon_delta_units
    reserve.balance_units = reserve.cum_xi_units - reserve.cum_upsilon_units
    if reserve.balance_units < 0:
        raise NegativeReserveInvariantBreach(
            f"treasury balance {reserve.balance_units} units after "
            f"xi={xi_delta_units}, upsilon={upsilon_delta_units}"
        )
    return reserve


@dataclass(frozen=True)
class RewardShares:
    plp_units: int
    slp_long_units: int
    slp_short_units: int

    @property
    def total_units(self) -> int:
        return self.plp_units + self.slp_long_units + self.slp_short_units

    def as_dict(self) -> dict:
        return {
            PLP: self.plp_units,
            SLP_LONG: self.slp_long_units,
            SLP_SHORT: self.slp_short_units,
        }


def reward_distribute(
    pool: AssetPool,
    vaults: VaultPair,
    accrued_units: int,
    *,
    gamma: float = 0.01,
    alpha: float = 1.0,
    k_gov: float | None = None,
) -> RewardShares:
    """Split accrued rewards across the pLP and sLP classes.

    Baseline is a third each. The class whose capacity share of
    B = I + C_short/rho_short + C_long/rho_long sits above the 1/3
    target pays a corrective transfer of gamma (a fraction of the
    accrued amount) to the underweighted classes; transfers clamp at
    zero so no share goes negative, and the integer residue lands on
    the pLP share. k_gov is reserved for governance semantics and is
    currently unused.
    """
    del k_gov
    if accrued_units < 0:
        raise BadRates(f"accrued rewards cannot be negative, got {accrued_units}")
    if accrued_units == 0:
        return RewardShares(0, 0, 0)
    if not (0.0 <= gamma < 1.0):
        raise BadRates(f"gamma must be in [0, 1), got {gamma}")

    cap_short = vaults.short.capacity()
    cap_long = vaults.long.capacity()
    b = pool.inventory + cap_short + cap_long
    shares = {PLP: 1.0 / 3.0, SLP_LONG: 1.0 / 3.0, SLP_SHORT: 1.0 / 3.0}

    if b > 0:
        third = 1.0 / 3.0
        tol = 1e-12
        # Deviation from the ask-side equilibrium where short capacity
        # matches inventory, mirrored out of both vault shares.
        delta_i = pool.inventory - cap_short
        p_share = pool.inventory / b
        s_share = (cap_short - alpha * delta_i) / b
        l_share = (cap_long - alpha * delta_i) / b
        if p_share > third + tol:
            pay = min(gamma, shares[PLP])
            shares[PLP] -= pay
            shares[SLP_LONG] += pay / 2.0
            shares[SLP_SHORT] += pay / 2.0
        elif p_share < third - tol:
            pay_l = min(gamma / 2.0, shares[SLP_LONG])
            pay_s = min(gamma / 2.0, shares[SLP_SHORT])
            shares[SLP_LONG] -= pay_l
            shares[SLP_SHORT] -= pay_s
            shares[PLP] += pay_l + pay_s
        else:
            diff = l_share - s_share
            if diff > tol:
                pay = min(gamma, shares[SLP_LONG])
                shares[SLP_LONG] -= pay
                shares[SLP_SHORT] += pay
            elif diff < -tol:
                pay = min(gamma, shares[SLP_SHORT])
                shares[SLP_SHORT] -= pay
                shares[SLP_LONG] += pay

    long_units = round(shares[SLP_LONG] * accrued_units)
    short_units = round(shares[SLP_SHORT] * accrued_units)
    plp_units = accrued_units - long_units - short_units
    # Rounding can only push plp negative when both sLP shares round up
    # while plp's true share is ~0; pull the excess back from the larger.
    while plp_units < 0:
        if long_units >= short_units and long_units > 0:
            long_units -= 1
        elif short_units > 0:
            short_units -= 1
        else:
            break
        plp_units = accrued_units - long_units - short_units
    return RewardShares(plp_units, long_units, short_units)


@dataclass
class RewardLedger:
    """Accrued and claimable reward balances per asset and class."""

    accrued_units: dict = field(default_factory=dict)
    claimable_units: dict = field(default_factory=dict)

    def accrue(self, asset_id: str, units: int) -> None:
        if units < 0:
            raise BadRates("cannot accrue a negative reward")
        self.accrued_units[asset_id] = self.accrued_units.get(asset_id, 0) + units

    def pending_units(self, asset_id: str) -> int:
        return self.accrued_units.get(asset_id, 0)

    def distribute(self, asset_id: str, shares: RewardShares) -> None:
        pending = self.accrued_units.get(asset_id, 0)
        if shares.total_units != pending:
            raise BadRates(
                f"shares {shares.total_units} do not match pending {pending}"
            )
        for cls, units in shares.as_dict().items():
            key = (asset_id, cls)
            self.claimable_units[key] = self.claimable_units.get(key, 0) + units
        self.accrued_units[asset_id] = 0

    def claims(self):
        """(agent, asset, class, claimable $S) rows, class-level agents."""
        rows = []
        for (asset_id, cls), units in sorted(self.claimable_units.items()):
            rows.append((cls, asset_id, cls, from_units(units)))
        return rows

    def total_claimable_units(self) -> int:
        return sum(self.claimable_units.values()) + sum(self.accrued_units.values())
