"""Rebalancing-premium pricing and swap execution.

Every swap is two synthetic legs against the accounting asset: the
trader sells asset_in (that pool's synthetic flow T falls by the
adjusted notional) and buys asset_out (its T rises by the same amount).
Each leg pays or earns a premium delta equal to the move of that leg's
premium function between the old and new T, so trades that worsen an
imbalance pay and trades that restore balance are rebated. The adjusted
notional V' solves

    V' + dR_in(V') + dR_out(V') + theta * v_s = v_s

which is piecewise quadratic in V' (the pieces change where either leg's
T crosses zero). The solver walks the pieces outward from V' = 0 and
returns the first root, so it is continuous across piece boundaries and
lands exactly on the closed-form boundary solutions when a leg's T is
driven exactly to zero.

Committed amounts are integer ledger units. The premium deltas are
functions of the committed integer T states (so premium flows telescope
exactly to zero over any path that returns T to zero), the trade balance
v_s = V' + rp_in + rp_out + fee holds exactly in integer units, and the
sub-unit rounding residue is absorbed into the fee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .eldf import AssetCurves, integrate_eldf, solve_volume_for_value
from .errors import (
    CurveUnavailable,
    ExceedsCapacity,
    InsufficientInventory,
    NoFeasibleSolution,
    StaleQuote,
)
from .ledger import BalanceSheet
from .money import from_units, to_units

_CAP_TOL = 1e-9


@dataclass(frozen=True)
class RebalanceParams:
    """Premium aggressiveness and cover coefficients, one pair per side."""

    a_rhs: float
    a_lhs: float
    d_rhs: float
    d_lhs: float

    def __post_init__(self):
        if self.a_rhs < 0 or self.a_lhs < 0:
            raise ValueError("aggressiveness must be nonnegative")
        if self.d_rhs < 0 or self.d_lhs < 0:
            raise ValueError("cover coefficients must be nonnegative")


@dataclass(frozen=True)
class FeeSchedule:
    theta: float
    xi: float

    def __post_init__(self):
        if not (0.0 <= self.theta < 1.0):
            raise ValueError(f"theta must be in [0, 1), got {self.theta}")
        if not (0.0 <= self.xi <= self.theta):
            raise ValueError(f"xi must satisfy 0 <= xi <= theta, got {self.xi}")


def premium_fn(t: float, params: RebalanceParams) -> float:
    """Outstanding premium at synthetic flow t; nonnegative on both sides."""
    if t >= 0:
        return t * (t + params.a_rhs) * params.d_rhs
    return -t * (-t + params.a_lhs) * params.d_lhs


def rp_delta(t_prev: float, t_next: float, params: RebalanceParams) -> float:
    """Trader premium for moving the flow t_prev -> t_next.

    Positive when the move grows the imbalance (trader pays), negative
    when it shrinks it (trader is rebated).
    """
    return premium_fn(t_next, params) - premium_fn(t_prev, params)


def premium_units(t_units: int, params: RebalanceParams) -> int:
    """Premium at an integer-unit flow state, rounded to ledger units.

    Deterministic function of the committed state so premium deltas
    telescope exactly over any trade path.
    """
    return to_units(premium_fn(from_units(t_units), params))


def _branch(t_sign_positive: bool, params: RebalanceParams):
    """(d, a, s) of R(t) = d*(t*t + s*a*t) on one side of t = 0."""
    if t_sign_positive:
        return params.d_rhs, params.a_rhs, 1.0
    return params.d_lhs, params.a_lhs, -1.0


def _quad_roots(a: float, b: float, c: float) -> list[float]:
    if a == 0.0:
        if b == 0.0:
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    if b >= 0.0:
        q = -(b + sq) / 2.0
    else:
        q = -(b - sq) / 2.0
    roots = [q / a]
    if q != 0.0:
        roots.append(c / q)
    return roots


def solve_adjusted_notional(
    v_s: float,
    t_in0: float,
    t_out0: float,
    params_in: RebalanceParams,
    params_out: RebalanceParams,
    theta: float,
) -> float:
    """Smallest V' >= 0 balancing V' + dR_in + dR_out + theta*v_s = v_s.

    The in-leg flow moves t_in0 -> t_in0 - V', the out-leg
    t_out0 -> t_out0 + V'. Pieces are delimited by the volumes at which
    either flow crosses zero; within a piece the balance is a quadratic.
    """
    if v_s < 0:
        raise NoFeasibleSolution(f"gross notional must be nonnegative, got {v_s}")
    if v_s == 0.0:
        return 0.0
    r_in0 = premium_fn(t_in0, params_in)
    r_out0 = premium_fn(t_out0, params_out)
    rhs = (1.0 - theta) * v_s

    def residual(v: float) -> float:
        return (
            v
            + premium_fn(t_in0 - v, params_in)
            - r_in0
            + premium_fn(t_out0 + v, params_out)
            - r_out0
            - rhs
        )

    breaks = sorted(
        b for b in (t_in0 if t_in0 > 0 else None, -t_out0 if t_out0 < 0 else None)
        if b is not None
    )
    edges = [0.0] + breaks + [math.inf]
    scale = max(1.0, v_s, abs(t_in0), abs(t_out0))
    tol = 1e-12 * scale

    for lo, hi in zip(edges, edges[1:]):
        if hi - lo <= tol and math.isfinite(hi):
            continue
        mid = lo + 1.0 if math.isinf(hi) else 0.5 * (lo + hi)
        d_i, a_i, s_i = _branch(t_in0 - mid >= 0, params_in)
        d_o, a_o, s_o = _branch(t_out0 + mid >= 0, params_out)
        qa = d_i + d_o
        qb = 1.0 - d_i * (2.0 * t_in0 + s_i * a_i) + d_o * (2.0 * t_out0 + s_o * a_o)
        qc = (
            d_i * (t_in0 * t_in0 + s_i * a_i * t_in0)
            - r_in0
            + d_o * (t_out0 * t_out0 + s_o * a_o * t_out0)
            - r_out0
            - rhs
        )
        candidates = sorted(
            min(max(r, lo), hi if math.isfinite(hi) else r)
            for r in _quad_roots(qa, qb, qc)
            if lo - tol <= r and (math.isinf(hi) or r <= hi + tol)
        )
        for root in candidates:
            # Newton polish on the exact piecewise residual.
            v = root
            for _ in range(4):
                d_i2, a_i2, s_i2 = _branch(t_in0 - v >= 0, params_in)
                d_o2, a_o2, s_o2 = _branch(t_out0 + v >= 0, params_out)
                deriv = (
                    1.0
                    - d_i2 * (2.0 * (t_in0 - v) + s_i2 * a_i2)
                    + d_o2 * (2.0 * (t_out0 + v) + s_o2 * a_o2)
                )
                if deriv == 0.0:
                    break
                step = residual(v) / deriv
                v_new = v - step
                if not (lo - tol <= v_new and (math.isinf(hi) or v_new <= hi + tol)):
                    break
                v = v_new
                if abs(step) < 1e-15 * scale:
                    break
            if abs(residual(v)) <= 1e-9 * scale and v >= -tol:
                return max(v, 0.0)
    raise NoFeasibleSolution(
        f"no nonnegative root for v_s={v_s}, t_in={t_in0}, t_out={t_out0}"
    )


@dataclass(frozen=True)
class OpenInventoryLimits:
    """Caps on post-trade open inventory, from vault collateral sizing."""

    max_surplus: float
    max_deficit: float


@dataclass(frozen=True)
class SwapQuote:
    asset_in: str
    asset_out: str
    v_in: float
    v_out: float
    v_s_units: int
    v_prime_units: int
    rp_in_units: int
    rp_out_units: int
    fee_units: int
    t_in_after_units: int
    t_out_after_units: int
    state_version: int

    def __post_init__(self):
        if self.v_prime_units < 0:
            raise NoFeasibleSolution("adjusted notional cannot be negative")
        balance = (
            self.v_prime_units
            + self.rp_in_units
            + self.rp_out_units
            + self.fee_units
        )
        if balance != self.v_s_units:
            raise NoFeasibleSolution(
                f"quote does not balance: {balance} != {self.v_s_units}"
            )

    @property
    def v_s(self) -> float:
        return from_units(self.v_s_units)

    @property
    def v_prime_s(self) -> float:
        return from_units(self.v_prime_units)

    @property
    def rp_x(self) -> float:
        """Premium delta on the in-leg."""
        return from_units(self.rp_in_units)

    @property
    def rp_y(self) -> float:
        """Premium delta on the out-leg."""
        return from_units(self.rp_out_units)

    @property
    def fee(self) -> float:
        return from_units(self.fee_units)


def quote_swap(
    asset_in: str,
    asset_out: str,
    v_in: float,
    sheet: BalanceSheet,
    curves: Mapping[str, AssetCurves],
    params_by_asset: Mapping[str, RebalanceParams],
    fees: FeeSchedule,
    *,
    limits_by_asset: Mapping[str, OpenInventoryLimits] | None = None,
) -> SwapQuote:
    """Price v_in of asset_in against asset_out at the current state.

    The gross notional marks the in-leg on the bid curve from its slot
    mark; the adjusted notional is converted to asset_out on its ask
    curve. The quote pins the sheet version and fails stale at execution
    if anything moved.
    """
    if not v_in > 0:
        raise NoFeasibleSolution(f"v_in must be positive, got {v_in}")
    if asset_in == asset_out:
        raise NoFeasibleSolution("cannot swap an asset for itself")
    cin = curves.get(asset_in)
    cout = curves.get(asset_out)
    if cin is None or cout is None:
        missing = asset_in if cin is None else asset_out
        raise CurveUnavailable(f"no curves for {missing}")
    params_in = params_by_asset[asset_in]
    params_out = params_by_asset[asset_out]

    v_s = integrate_eldf(cin.bid, cin.bid_mark, cin.bid_mark + v_in)
    v_s_units = to_units(v_s)
    t_in0_u = sheet.spools[asset_in].t_units
    t_out0_u = sheet.spools[asset_out].t_units

    v_prime = solve_adjusted_notional(
        from_units(v_s_units),
        from_units(t_in0_u),
        from_units(t_out0_u),
        params_in,
        params_out,
        fees.theta,
    )

    # Commit to integer units: premium deltas are functions of the
    # committed T endpoints and the fee absorbs the rounding residue,
    # keeping the balance identity exact. The committed notional is the
    # integer near the real solution whose implied fee best matches
    # theta * v_s without going negative.
    r_in0_u = premium_units(t_in0_u, params_in)
    r_out0_u = premium_units(t_out0_u, params_out)
    target_fee = round(fees.theta * v_s_units)

    def implied(p: int) -> tuple[int, int, int]:
        rp_in = premium_units(t_in0_u - p, params_in) - r_in0_u
        rp_out = premium_units(t_out0_u + p, params_out) - r_out0_u
        return rp_in, rp_out, v_s_units - p - rp_in - rp_out

    p0 = max(0, to_units(v_prime))
    best_p, best_err = None, None
    for p in range(max(0, p0 - 6), p0 + 7):
        _, _, fee = implied(p)
        err = abs(fee - target_fee) + (10**9 if fee < 0 else 0)
        if best_err is None or err < best_err:
            best_p, best_err = p, err
    p = best_p
    rp_in_u, rp_out_u, fee_u = implied(p)
    while fee_u < 0 and p > 0:
        p -= 1
        rp_in_u, rp_out_u, fee_u = implied(p)

    v_out = solve_volume_for_value(cout.ask, cout.ask_mark, from_units(p)) - cout.ask_mark

    pool_out = sheet.pools[asset_out]
    if v_out > pool_out.inventory + _CAP_TOL * max(1.0, pool_out.inventory):
        raise InsufficientInventory(
            f"{asset_out} pool holds {pool_out.inventory}, quote needs {v_out}"
        )
    if limits_by_asset is not None:
        pool_in = sheet.pools[asset_in]
        lim_in = limits_by_asset[asset_in]
        lim_out = limits_by_asset[asset_out]
        surplus_after = (pool_in.inventory + v_in) - pool_in.lp_inventory
        if surplus_after > lim_in.max_surplus + _CAP_TOL * max(1.0, lim_in.max_surplus):
            raise ExceedsCapacity(
                f"{asset_in} surplus {surplus_after:.6g} would exceed "
                f"long-vault capacity {lim_in.max_surplus:.6g}"
            )
        deficit_after = pool_out.lp_inventory - (pool_out.inventory - v_out)
        if deficit_after > lim_out.max_deficit + _CAP_TOL * max(1.0, lim_out.max_deficit):
            raise ExceedsCapacity(
                f"{asset_out} deficit {deficit_after:.6g} would exceed "
                f"short-vault capacity {lim_out.max_deficit:.6g}"
            )

    return SwapQuote(
        asset_in=asset_in,
        asset_out=asset_out,
        v_in=v_in,
        v_out=v_out,
        v_s_units=v_s_units,
        v_prime_units=p,
        rp_in_units=rp_in_u,
        rp_out_units=rp_out_u,
        fee_units=fee_u,
        t_in_after_units=t_in0_u - p,
        t_out_after_units=t_out0_u + p,
        state_version=sheet.version,
    )


def execute_swap(
    quote: SwapQuote,
    sheet: BalanceSheet,
    curves: Mapping[str, AssetCurves],
    *,
    timestep: int = 0,
) -> float:
    """Commit a quote: move inventory, T, premium reserves, and marks.

    Returns v_out delivered to the trader. The quote must have been
    computed against the sheet's current version; any interleaved
    mutation (trade, refit, LP flow) invalidates it.
    """
    if quote.state_version != sheet.version:
        raise StaleQuote(
            f"quote pinned version {quote.state_version}, sheet at {sheet.version}"
        )
    pool_out = sheet.pools[quote.asset_out]
    if quote.v_out > pool_out.inventory + _CAP_TOL * max(1.0, pool_out.inventory):
        raise InsufficientInventory(
            f"{quote.asset_out} pool holds {pool_out.inventory}, "
            f"fill needs {quote.v_out}"
        )
    sheet.record_trade(
        (
            timestep,
            quote.asset_in,
            quote.asset_out,
            quote.v_in,
            quote.v_out,
            quote.v_s_units,
            quote.v_prime_units,
            quote.rp_in_units,
            quote.rp_out_units,
            quote.fee_units,
        )
    )
    curves[quote.asset_in].bid_mark += quote.v_in
    curves[quote.asset_out].ask_mark += quote.v_out
    return quote.v_out
