"""Secondary-LP collateral vaults, swaptions, and capacity bounds.

Vault collateral backs open inventory on one side each: the short vault
covers deficits (inventory below the LP claim, positive T), the long
vault covers surpluses. A vault's capacity is collateral divided by its
collateralisation rate and drops to zero on liquidation. A swaption per
asset and epoch settles the change in external-curve valuation of the
open-inventory notional; settlement is non-recourse, capped at the
paying vault's collateral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .eldf import Eldf, integrate_eldf
from .errors import (
    BadParams,
    NoCounterpartyCollateral,
    ZeroCapacity,
    ZeroPrevValue,
)
from .ledger import AssetPool
from .money import from_units, to_units
from .pricing import OpenInventoryLimits, RebalanceParams, premium_units

LONG = "long"
SHORT = "short"

PROTOCOL_PAYS_VARIABLE = "protocol_pays_variable"
PROTOCOL_PAYS_FIXED = "protocol_pays_fixed"


@dataclass
class Vault:
    asset_id: str
    side: str
    collateral_units: int
    coll_rate: float
    margin_floor_units: int
    liquidated: bool = False

    def __post_init__(self):
        if not (0.0 < self.coll_rate <= 1.0):
            raise BadParams(f"collateralisation rate must be in (0, 1], got {self.coll_rate}")
        if self.collateral_units < 0:
            raise BadParams("collateral cannot be negative")

    @property
    def collateral(self) -> float:
        return from_units(self.collateral_units)

    def capacity(self) -> float:
        """Maximum open inventory this vault can cover; 0 once liquidated."""
        if self.liquidated:
            return 0.0
        return self.collateral / self.coll_rate

    def deposit(self, amount_units: int) -> None:
        if amount_units <= 0:
            raise BadParams("vault deposit must be positive")
        self.collateral_units += amount_units
        if self.liquidated and self.collateral_units > self.margin_floor_units:
            self.liquidated = False

    def withdraw(self, amount_units: int) -> None:
        if amount_units <= 0 or amount_units > self.collateral_units:
            raise BadParams(
                f"vault withdrawal {amount_units} outside (0, {self.collateral_units}]"
            )
        self.collateral_units -= amount_units


@dataclass
class VaultPair:
    long: Vault
    short: Vault

    def by_side(self, side: str) -> Vault:
        return self.long if side == LONG else self.short


@dataclass(frozen=True)
class Utilisation:
    u_rhs: float
    u_lhs: float


def utilisation(
    pool: AssetPool, vaults: VaultPair, *, u_max_report: float = math.inf
) -> Utilisation:
    """Open inventory relative to what the vaults can support, per side.

    The deficit side is additionally bounded by the LP claim itself (a
    deficit can never exceed what LPs deposited). Zero deficit with zero
    capacity reports zero rather than erroring so empty scenarios stay
    well defined.
    """
    deficit = pool.lp_inventory - pool.inventory
    u_rhs = 0.0
    u_lhs = 0.0
    if deficit > 0:
        denom = min(pool.lp_inventory, vaults.short.capacity())
        if denom <= 0:
            raise ZeroCapacity(
                f"{pool.asset_id} deficit {deficit} with no short-side capacity"
            )
        u_rhs = deficit / denom
    elif deficit < 0:
        denom = vaults.long.capacity()
        if denom <= 0:
            raise ZeroCapacity(
                f"{pool.asset_id} surplus {-deficit} with no long-side capacity"
            )
        u_lhs = -deficit / denom
    return Utilisation(
        u_rhs=min(max(u_rhs, 0.0), u_max_report),
        u_lhs=min(max(u_lhs, 0.0), u_max_report),
    )


def cover_coefficient(
    u: float, d_min: float, d_max: float, u_max: float, k: float
) -> float:
    """Utilisation-dependent premium multiplier.

    Equals d_min at zero utilisation and d_max at u_max, following a
    power-k ramp in between; utilisation beyond u_max is clamped.
    """
    if d_min > d_max:
        raise BadParams(f"d_min {d_min} > d_max {d_max}")
    if u_max <= 0:
        raise BadParams(f"u_max must be positive, got {u_max}")
    if k <= 0:
        raise BadParams(f"exponent must be positive, got {k}")
    if u < 0:
        raise BadParams(f"utilisation must be nonnegative, got {u}")
    u_eff = min(u, u_max)
    return (d_max - d_min) * (u_eff / u_max) ** k + d_min


@dataclass(frozen=True)
class SwaptionPosition:
    """One epoch's hedge of the open-inventory notional."""

    asset_id: str
    notional: float
    fixed_leg_value_units: int
    direction: str


def strike_swaption(pool: AssetPool, curve: Eldf) -> Optional[SwaptionPosition]:
    """Open a position on the current open inventory, valued on the
    current curve (which becomes the fixed leg at settlement)."""
    gap = pool.inventory - pool.lp_inventory
    if gap == 0.0:
        return None
    notional = abs(gap)
    direction = PROTOCOL_PAYS_VARIABLE if gap > 0 else PROTOCOL_PAYS_FIXED
    value = integrate_eldf(curve, 0.0, notional)
    return SwaptionPosition(
        asset_id=pool.asset_id,
        notional=notional,
        fixed_leg_value_units=to_units(value),
        direction=direction,
    )


@dataclass(frozen=True)
class SettlementOutcome:
    """Signed settlement from the variable payer to the fixed owner.

    paid_units carries the actual transfer after the non-recourse cap;
    vault_pays is True when the sLP side owes (its collateral was
    debited), False when the protocol owes the sLP.
    """

    raw_units: int
    paid_units: int
    vault_pays: bool
    capped: bool


def settle_swaption(
    pos: SwaptionPosition,
    curve_prev: Eldf,
    curve_now: Eldf,
    counterparty: Vault | None,
) -> SettlementOutcome:
    """Settle the epoch move of the notional's curve valuation.

    Settlement = notional * (value_now / value_prev - 1), positive paid
    by the variable-leg payer to the fixed-leg owner. When the sLP vault
    is the payer the transfer is capped at its collateral and the vault
    is debited here; the protocol side of the cash movement is the
    caller's to book.
    """
    value_prev = integrate_eldf(curve_prev, 0.0, pos.notional)
    if value_prev <= 0:
        raise ZeroPrevValue(
            f"previous-epoch valuation {value_prev} of {pos.asset_id} notional"
        )
    value_now = integrate_eldf(curve_now, 0.0, pos.notional)
    raw = to_units(pos.notional * (value_now / value_prev - 1.0))
    if raw == 0:
        return SettlementOutcome(0, 0, vault_pays=False, capped=False)

    # Variable payer owes on raw > 0. The sLP holds the variable leg when
    # the protocol pays fixed, and vice versa.
    slp_is_variable = pos.direction == PROTOCOL_PAYS_FIXED
    vault_pays = (raw > 0) == slp_is_variable
    if vault_pays:
        if counterparty is None:
            raise NoCounterpartyCollateral(f"no vault to settle {pos.asset_id}")
        available = 0 if counterparty.liquidated else counterparty.collateral_units
        paid = min(abs(raw), available)
        counterparty.collateral_units -= paid
        return SettlementOutcome(raw, paid, vault_pays=True, capped=paid < abs(raw))
    paid = abs(raw)
    if counterparty is not None:
        counterparty.collateral_units += paid
    return SettlementOutcome(raw, paid, vault_pays=False, capped=False)


def margin_check(vault: Vault) -> bool:
    """Liquidate when collateral is at or below the floor.

    Liquidation zeroes the vault's capacity contribution; swaption
    exposure is unwound by the caller. Returns True when liquidation
    fired.
    """
    if vault.liquidated:
        return True
    if vault.collateral_units <= vault.margin_floor_units:
        vault.liquidated = True
        return True
    return False


@dataclass(frozen=True)
class MaxTradeable:
    v_max_bid: float
    v_max_ask: float


def max_tradeable(pool: AssetPool, vaults: VaultPair) -> MaxTradeable:
    """Largest supportable volume per direction at current collateral.

    Bid side (pool buying, surplus growing) is bounded by long-vault
    capacity; ask side (pool selling) by inventory and short-vault
    capacity together.
    """
    return MaxTradeable(
        v_max_bid=vaults.long.capacity(),
        v_max_ask=min(pool.inventory, vaults.short.capacity()),
    )


def open_inventory_limits(pool: AssetPool, vaults: VaultPair) -> OpenInventoryLimits:
    """Caps on post-trade open inventory for the pricing module."""
    return OpenInventoryLimits(
        max_surplus=vaults.long.capacity(),
        max_deficit=min(pool.lp_inventory, vaults.short.capacity()),
    )


def capital_efficiency_gap(pool: AssetPool, vault_short: Vault) -> float:
    """Distance from the ask-side optimum where short capacity equals
    inventory; executable ask volume is maximised exactly at zero gap."""
    return abs(vault_short.capacity() - pool.inventory)


@dataclass(frozen=True)
class PremiumFlowResult:
    applied_units: int
    requested_units: int
    liquidated: bool


def slp_premium_flow(
    t_prev_units: int,
    t_next_units: int,
    params: RebalanceParams,
    vault: Vault,
) -> PremiumFlowResult:
    """Pass the premium move through to the covering vault's collateral.

    The vault is credited when the outstanding premium fell (the system
    rebalanced) and debited when it rose. Debits are non-recourse: they
    stop at zero collateral, after which the margin check liquidates.
    """
    flow = premium_units(t_prev_units, params) - premium_units(t_next_units, params)
    if flow >= 0:
        vault.collateral_units += flow
        applied = flow
    else:
        applied = -min(-flow, vault.collateral_units)
        vault.collateral_units += applied
    liquidated = margin_check(vault)
    return PremiumFlowResult(
        applied_units=applied, requested_units=flow, liquidated=liquidated
    )
