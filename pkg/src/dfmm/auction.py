"""Premium auction: regime tracking and aggressiveness updates.

Utilisation is classified into four regimes. Inside the optimal band no
auction runs. Outside it, a breach clock measures how long rebalancing
takes; every time a regime's deadline window expires without the system
re-entering the optimal band, the active side's aggressiveness steps up
by one increment (treasury reserve permitting), and when a breach
resolves faster than its deadline the aggressiveness steps back down.
Band-regime deadlines are denominated in epochs and evaluated at epoch
boundaries; the critical regime counts raw timesteps. Aggressiveness
changes with open flow create a discrepancy between premia already
charged and premia now promised; that discrepancy is the treasury's to
fund, so increases are capped at the treasury balance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import BadParams, InactiveSide, NoTargetInOptimal
from .money import from_units
from .pricing import RebalanceParams, premium_units

OPTIMAL = "optimal"
BAND1 = "band1"
BAND2 = "band2"
CRITICAL = "critical"

RHS = "rhs"
LHS = "lhs"

TOO_SLOW = "too_slow"
TOO_FAST = "too_fast"
ON_TARGET = "on_target"


@dataclass(frozen=True)
class RegimeThresholds:
    theta0: float
    theta_star: float
    theta_dagger: float

    def __post_init__(self):
        if not (0.0 <= self.theta0 <= self.theta_star <= self.theta_dagger <= 1.0):
            raise BadParams(
                "thresholds must satisfy 0 <= theta0 <= theta_star <= "
                f"theta_dagger <= 1, got ({self.theta0}, {self.theta_star}, "
                f"{self.theta_dagger})"
            )


@dataclass(frozen=True)
class RebalanceTargets:
    j_star: int
    j_prime: int
    j_dagger: int

    def __post_init__(self):
        if not (self.j_star >= self.j_prime >= 1):
            raise BadParams(
                f"need j_star >= j_prime >= 1, got ({self.j_star}, {self.j_prime})"
            )
        if self.j_dagger < 1:
            raise BadParams(f"j_dagger must be >= 1, got {self.j_dagger}")


def classify_regime(u: float, thresholds: RegimeThresholds) -> str:
    """Left-closed interval lookup; total for all u >= 0."""
    if u < 0:
        raise BadParams(f"utilisation must be nonnegative, got {u}")
    if u < thresholds.theta0:
        return OPTIMAL
    if u < thresholds.theta_star:
        return BAND1
    if u < thresholds.theta_dagger:
        return BAND2
    return CRITICAL


def target_for(regime: str, targets: RebalanceTargets) -> tuple[int, str]:
    """Deadline for a regime: (count, unit) with unit 'epochs' or 'timesteps'."""
    if regime == OPTIMAL:
        raise NoTargetInOptimal("no rebalancing target inside the optimal band")
    if regime == BAND1:
        return targets.j_star, "epochs"
    if regime == BAND2:
        return targets.j_prime, "epochs"
    return targets.j_dagger, "timesteps"


@dataclass
class SideClock:
    """Breach and deadline-window clocks for one asset side."""

    breach_timesteps: int = 0
    window_timesteps: int = 0
    window_epochs: int = 0
    last_regime: str = OPTIMAL


def record_rebalance_progress(clock: SideClock, u_now: float, thresholds: RegimeThresholds):
    """Advance the breach clock by one timestep.

    Returns the measured rebalancing time (in timesteps) when the side
    just re-entered the optimal band, else None. Each re-entry resets
    the clock, so oscillating breaches are measured separately.
    """
    regime = classify_regime(u_now, thresholds)
    if regime == OPTIMAL:
        if clock.breach_timesteps > 0:
            measured = clock.breach_timesteps
            clock.breach_timesteps = 0
            clock.window_timesteps = 0
            clock.window_epochs = 0
            clock.last_regime = OPTIMAL
            return measured
        return None
    clock.breach_timesteps += 1
    clock.window_timesteps += 1
    clock.last_regime = regime
    return None


@dataclass(frozen=True)
class AggressivenessUpdate:
    a_before: float
    a_after: float
    capped: bool
    upsilon_units: int
    params_after: RebalanceParams


def update_aggressiveness(
    a_prev: float,
    side: str,
    t_open_units: int,
    comparison: str,
    params: RebalanceParams,
    lam: float,
    a_min: float,
    tr_units: int,
) -> AggressivenessUpdate:
    """Apply one auction comparison to the active side's aggressiveness.

    too_fast steps down by the increment (floored at the minimum);
    too_slow steps up, but when the implied premium increase at the open
    flow would exceed the treasury reserve, the step is capped so the
    increase exactly exhausts it. The returned discrepancy is the exact
    ledger-unit premium change at the open flow.
    """
    if t_open_units == 0:
        raise InactiveSide("no open flow on this side")
    if side not in (RHS, LHS):
        raise BadParams(f"unknown side {side!r}")
    d = params.d_rhs if side == RHS else params.d_lhs
    abs_t = abs(from_units(t_open_units))

    capped = False
    if comparison == TOO_FAST:
        a_new = max(a_prev - lam, a_min)
    elif comparison == TOO_SLOW:
        candidate = a_prev + lam
        increment = abs_t * lam * d
        tr = from_units(tr_units)
        if increment <= tr or d == 0.0:
            a_new = candidate
        else:
            a_new = a_prev + tr / (abs_t * d)
            capped = True
    elif comparison == ON_TARGET:
        a_new = a_prev
    else:
        raise BadParams(f"unknown comparison {comparison!r}")

    if side == RHS:
        params_after = replace(params, a_rhs=a_new)
    else:
        params_after = replace(params, a_lhs=a_new)
    upsilon = premium_units(t_open_units, params_after) - premium_units(
        t_open_units, params
    )
    return AggressivenessUpdate(
        a_before=a_prev,
        a_after=a_new,
        capped=capped,
        upsilon_units=upsilon,
        params_after=params_after,
    )


@dataclass
class AuctionState:
    """Per-asset auction clocks plus the shared increment parameters."""

    lam: float
    a_min: float
    clocks: dict = field(default_factory=dict)

    def clock(self, asset_id: str, side: str) -> SideClock:
        return self.clocks.setdefault((asset_id, side), SideClock())


@dataclass(frozen=True)
class AuctionEvent:
    asset_id: str
    side: str
    regime: str
    breach_clock: int
    target: int
    comparison: str
    a_before: float
    a_after: float
    capped: bool
    upsilon_units: int


def auction_step(
    state: AuctionState,
    utilisation_by_asset,
    t_units_by_asset,
    params_by_asset,
    targets: RebalanceTargets,
    thresholds: RegimeThresholds,
    tr_units: int,
    *,
    at_epoch_boundary: bool,
    epoch_len: int,
):
    """One scheduler tick of the auction across all assets.

    utilisation_by_asset maps asset -> Utilisation; t_units_by_asset maps
    asset -> synthetic flow. Assets are processed in ascending id order,
    draining the shared treasury reserve sequentially. Returns the
    updated params mapping and the list of AuctionEvents; the caller
    books each event's discrepancy against the treasury and the premium
    reserve.
    """
    params_out = dict(params_by_asset)
    events: list[AuctionEvent] = []
    for asset_id in sorted(utilisation_by_asset):
        util = utilisation_by_asset[asset_id]
        t_units = t_units_by_asset[asset_id]
        for side, u_now in ((RHS, util.u_rhs), (LHS, util.u_lhs)):
            clock = state.clock(asset_id, side)
            regime_before = clock.last_regime
            measured = record_rebalance_progress(clock, u_now, thresholds)
            comparison = None
            regime = clock.last_regime
            target = 0
            breach_shown = clock.breach_timesteps

            if measured is not None:
                # Breach resolved: compare measured time against the
                # deadline of the regime active when it resolved. Slower
                # than target was already penalised at each expiry, so
                # only a fast resolution acts here.
                regime = regime_before
                target, unit = target_for(regime_before, targets)
                measured_units = (
                    measured if unit == "timesteps" else math.ceil(measured / epoch_len)
                )
                breach_shown = measured
                if measured_units < target:
                    comparison = TOO_FAST
                elif measured_units == target:
                    comparison = ON_TARGET
            elif clock.last_regime != OPTIMAL:
                target, unit = target_for(clock.last_regime, targets)
                regime = clock.last_regime
                expired = False
                if unit == "timesteps":
                    if clock.window_timesteps >= target:
                        expired = True
                elif at_epoch_boundary:
                    clock.window_epochs += 1
                    if clock.window_epochs >= target:
                        expired = True
                if expired:
                    comparison = TOO_SLOW
                    clock.window_timesteps = 0
                    clock.window_epochs = 0

            if comparison is None or comparison == ON_TARGET:
                continue
            if t_units == 0:
                continue  # no open flow: the auction passes
            params = params_out[asset_id]
            a_prev = params.a_rhs if side == RHS else params.a_lhs
            upd = update_aggressiveness(
                a_prev, side, t_units, comparison, params, state.lam, state.a_min,
                tr_units,
            )
            params_out[asset_id] = upd.params_after
            tr_units -= upd.upsilon_units
            events.append(
                AuctionEvent(
                    asset_id=asset_id,
                    side=side,
                    regime=regime,
                    breach_clock=breach_shown,
                    target=target,
                    comparison=comparison,
                    a_before=upd.a_before,
                    a_after=upd.a_after,
                    capped=upd.capped,
                    upsilon_units=upd.upsilon_units,
                )
            )
    return params_out, events
