"""Deterministic scenario engine: timesteps, epochs, agents, accounting.

Phase order within a timestep is fixed: external market step, slot
refits, exogenous trader flow, arbitrageur, auction progress, metrics.
Epoch boundaries additionally settle swaptions, pass premium flows to
the vaults, apply queued vault deposits/withdrawals, distribute rewards,
and re-strike hedge positions. One run is strictly single-threaded; all
randomness derives from the scenario seed, so identical configs produce
identical outputs byte for byte.

The engine keeps a full set of exact-unit accumulators and audits them
after every epoch: trade balances, premium-reserve telescoping, treasury
identity, and the hedged solvency margin. An audit failure is fail-stop:
the run halts with a diagnostic and the logs collected so far are
preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import treasury as treasury_mod
from ..auction import (
    AuctionState,
    RebalanceTargets,
    RegimeThresholds,
    auction_step,
)
from ..eldf import AssetCurves, Eldf, integrate_eldf, solve_volume_for_value
from ..errors import (
    ConfigInvalid,
    EngineError,
    InvariantBreach,
    NegativeReserveInvariantBreach,
    ZeroCapacity,
)
from ..ledger import BalanceSheet, solvency_check
from ..metrics import impermanent_loss, slippage
from ..money import from_units, to_units
from ..pricing import FeeSchedule, RebalanceParams, execute_swap, quote_swap
from ..treasury import RewardLedger, TreasuryReserve, treasury_update
from ..vaults import (
    LONG,
    SHORT,
    Utilisation,
    Vault,
    VaultPair,
    cover_coefficient,
    margin_check,
    open_inventory_limits,
    settle_swaption,
    slp_premium_flow,
    strike_swaption,
    utilisation,
)
from .agents import ArbitrageurAgent, TraderFlow
from .config import ScenarioConfig
from .market import ExternalMarket

LOG_KINDS = ("trades", "curves", "vaults", "auction", "treasury", "metrics", "rewards")


@dataclass
class RunArtifacts:
    logs: dict
    summary: dict
    config: ScenarioConfig


@dataclass
class FillRecord:
    timestep: int
    asset_in: str
    asset_out: str
    agent: str
    v_in: float
    v_out: float
    v_s_units: int
    v_prime_units: int
    rp_in_units: int
    rp_out_units: int
    fee_units: int


class Engine:
    def __init__(self, cfg: ScenarioConfig):
        cfg.require_valid()
        self.cfg = cfg
        self.t = 0
        self.epoch = 0
        self.halted = False
        self.diagnostic = ""

        root = np.random.SeedSequence(cfg.seed)
        market_seq, trader_seq, arb_seq = root.spawn(3)
        self.market = ExternalMarket(cfg.assets, market_seq)
        self.traders = TraderFlow(cfg, np.random.default_rng(trader_seq))
        self.arb = (
            ArbitrageurAgent(
                fixed_cost=cfg.arb_fixed_cost,
                haircut=cfg.arb_haircut,
                max_exposure=cfg.arb_max_exposure,
            )
            if cfg.arb_enabled
            else None
        )

        self.fees = FeeSchedule(theta=cfg.theta, xi=cfg.xi)
        self.thresholds = RegimeThresholds(cfg.theta0, cfg.theta_star, cfg.theta_dagger)
        self.targets = RebalanceTargets(cfg.j_star, cfg.j_prime, cfg.j_dagger)
        self.auction_state = AuctionState(lam=cfg.lam, a_min=cfg.a_min)
        self.reserve = TreasuryReserve()
        self.rewards = RewardLedger()

        self.sheet = BalanceSheet()
        self.curves: dict[str, AssetCurves] = {}
        self.strike_bid: dict[str, Eldf] = {}
        self.positions: dict[str, object] = {}
        self.vaults: dict[str, VaultPair] = {}
        self.params: dict[str, RebalanceParams] = {}
        self.epoch_t_units: dict[str, int] = {}
        self.initial_mid: dict[str, float] = {}
        self.queued_vault_flows: list[tuple[str, str, int]] = []

        floor_units = to_units(cfg.margin_floor)
        for acfg in sorted(cfg.assets, key=lambda a: a.asset_id):
            aid = acfg.asset_id
            self.sheet.deposit_plp(aid, acfg.deposit)
            self.vaults[aid] = VaultPair(
                long=Vault(aid, LONG, to_units(acfg.c_long), cfg.rho_long, floor_units),
                short=Vault(aid, SHORT, to_units(acfg.c_short), cfg.rho_short, floor_units),
            )
            d0 = cfg.d_min
            self.params[aid] = RebalanceParams(
                a_rhs=cfg.a_init, a_lhs=cfg.a_init, d_rhs=d0, d_lhs=d0
            )
            self.epoch_t_units[aid] = 0
            self.initial_mid[aid] = acfg.mid_price

        self.logs: dict[str, list] = {kind: [] for kind in LOG_KINDS}

        # exact-unit accumulators for the conservation audit
        self.total_v_s_units = 0
        self.total_v_prime_units = 0
        self.total_rp_units = 0
        self.total_fee_units = 0
        self.total_xi_units = 0
        self.total_reward_units = 0
        self.upsilon_topup_units = 0
        self.hedge_pnl_units = 0
        self.settlement_net_units = 0
        self.slp_flow_net_units = 0
        self.vault_external_units = 0

        # summary trackers
        self.fills: list[FillRecord] = []
        self.rejected = 0
        self.trader_cost_units = 0
        self.arb_pnl = 0.0
        self.liquidations = 0
        self.max_utilisation = 0.0
        self.min_margin_units: int | None = None
        self.initial_vault_units = sum(
            vp.long.collateral_units + vp.short.collateral_units
            for vp in self.vaults.values()
        )

        self._refit_curves(slot_id=0)
        self._strike_all()

    # ------------------------------------------------------------------
    # curve and vault plumbing

    def _extrapolation(self) -> str:
        return "clamp" if self.cfg.clamp_extrapolation else "error"

    def _refit_curves(self, slot_id: int) -> None:
        for aid in self.market.asset_ids():
            bid, ask = self.market[aid].fit_curves(
                slot_id, extrapolation=self._extrapolation()
            )
            if aid in self.curves:
                self.curves[aid].reset(bid, ask)
            else:
                self.curves[aid] = AssetCurves(aid, bid, ask)
            for curve in (bid, ask):
                rec = curve.to_record()
                self.logs["curves"].append((rec[0], aid) + rec[1:])
        self.sheet.bump_version()

    def _strike_all(self) -> None:
        for aid in self.sheet.asset_ids():
            bid = self.curves[aid].bid
            self.strike_bid[aid] = bid
            self.positions[aid] = strike_swaption(self.sheet.pools[aid], bid)
            self.epoch_t_units[aid] = self.sheet.spools[aid].t_units

    def _utilisation(self, aid: str):
        try:
            return utilisation(
                self.sheet.pools[aid],
                self.vaults[aid],
                u_max_report=self.cfg.u_max_report,
            )
        except ZeroCapacity:
            # a liquidated side with residual imbalance reports at the cap
            pool = self.sheet.pools[aid]
            deficit = pool.lp_inventory - pool.inventory
            cap = self.cfg.u_max_report
            return Utilisation(
                u_rhs=cap if deficit > 0 else 0.0,
                u_lhs=cap if deficit < 0 else 0.0,
            )

    def _recompute_cover(self) -> None:
        for aid in self.sheet.asset_ids():
            util = self._utilisation(aid)
            d_rhs = cover_coefficient(
                util.u_rhs, self.cfg.d_min, self.cfg.d_max, self.cfg.u_max, self.cfg.k
            )
            d_lhs = cover_coefficient(
                util.u_lhs, self.cfg.d_min, self.cfg.d_max, self.cfg.u_max, self.cfg.k
            )
            p = self.params[aid]
            if p.d_rhs != d_rhs or p.d_lhs != d_lhs:
                self.params[aid] = RebalanceParams(
                    a_rhs=p.a_rhs, a_lhs=p.a_lhs, d_rhs=d_rhs, d_lhs=d_lhs
                )

    # ------------------------------------------------------------------
    # trading

    def submit_trade(self, asset_in: str, asset_out: str, v_in: float, agent: str):
        """Quote and execute one swap; returns the fill or None if rejected."""
        limits = {
            aid: open_inventory_limits(self.sheet.pools[aid], self.vaults[aid])
            for aid in (asset_in, asset_out)
        }
        try:
            quote = quote_swap(
                asset_in,
                asset_out,
                v_in,
                self.sheet,
                self.curves,
                self.params,
                self.fees,
                limits_by_asset=limits,
            )
            execute_swap(quote, self.sheet, self.curves, timestep=self.t)
        except EngineError:
            self.rejected += 1
            return None

        xi_units = min(round(self.fees.xi * quote.v_s_units), max(quote.fee_units, 0))
        reward_units = quote.fee_units - xi_units
        treasury_update(self.reserve, xi_delta_units=xi_units)
        self.rewards.accrue(asset_out, reward_units)
        self.logs["treasury"].append(
            (self.t, "xi", asset_in, from_units(xi_units), self.reserve.balance)
        )

        fill = FillRecord(
            timestep=self.t,
            asset_in=asset_in,
            asset_out=asset_out,
            agent=agent,
            v_in=v_in,
            v_out=quote.v_out,
            v_s_units=quote.v_s_units,
            v_prime_units=quote.v_prime_units,
            rp_in_units=quote.rp_in_units,
            rp_out_units=quote.rp_out_units,
            fee_units=quote.fee_units,
        )
        self.fills.append(fill)
        self.logs["trades"].append(
            (
                self.t,
                f"{asset_in}->{asset_out}",
                v_in,
                quote.v_s,
                quote.v_prime_s,
                quote.rp_x,
                quote.rp_y,
                quote.fee,
                quote.v_out,
                from_units(quote.t_in_after_units),
                from_units(quote.t_out_after_units),
            )
        )
        mid_in = self.market[asset_in].mid
        exec_price = quote.v_s / v_in if v_in > 0 else mid_in
        self.logs["metrics"].append(
            (self.t, "slippage", f"{asset_in}->{asset_out}", slippage(mid_in, exec_price))
        )

        self.total_v_s_units += quote.v_s_units
        self.total_v_prime_units += quote.v_prime_units
        self.total_rp_units += quote.rp_in_units + quote.rp_out_units
        self.total_fee_units += quote.fee_units
        self.total_xi_units += xi_units
        self.total_reward_units += reward_units
        if agent == "trader":
            self.trader_cost_units += (
                quote.rp_in_units + quote.rp_out_units + quote.fee_units
            )
        return fill

    def queue_vault_flow(self, asset_id: str, side: str, amount: float) -> None:
        """Queue an sLP deposit (positive) or withdrawal; applied at the
        next epoch boundary so collateral cannot dodge a settlement."""
        self.queued_vault_flows.append((asset_id, side, to_units(amount)))

    # ------------------------------------------------------------------
    # timestep and epoch

    def step_timestep(self) -> None:
        self.t += 1
        cfg = self.cfg
        self.market.step_all()
        if (self.t - 1) % cfg.slot_len == 0:
            self._refit_curves(slot_id=(self.t - 1) // cfg.slot_len)
        self._recompute_cover()

        for trade_t, a_in, a_out, size in cfg.scripted_trades:
            if trade_t == self.t:
                self.submit_trade(a_in, a_out, size, agent="script")
        for intent in self.traders.arrivals(self.sheet.asset_ids()):
            self.submit_trade(intent.asset_in, intent.asset_out, intent.v_in, "trader")

        if self.arb is not None:
            self._run_arbitrageur()

        at_epoch_boundary = self.t % cfg.epoch_len == 0
        self._run_auction(at_epoch_boundary)
        self._emit_metrics()
        if at_epoch_boundary:
            self.step_epoch()
        self._audit()

    def _run_arbitrageur(self) -> None:
        t_units = {aid: self.sheet.spools[aid].t_units for aid in self.sheet.asset_ids()}
        decision = self.arb.decide(t_units, self.params, 0.0, self.fees.theta)
        if decision is None:
            return
        asset_in, asset_out, notional = decision
        # size the in-leg so its bid value is about the target notional
        cin = self.curves[asset_in]
        try:
            v_in = (
                solve_volume_for_value(cin.bid, cin.bid_mark, notional) - cin.bid_mark
            )
        except EngineError:
            return
        if v_in <= 0:
            return
        fill = self.submit_trade(asset_in, asset_out, v_in, agent="arb")
        if fill is None:
            return
        self.market[asset_in].record_flow(fill.v_in)
        self.market[asset_out].record_flow(-fill.v_out)
        gain = (
            self.market[asset_out].mid * fill.v_out
            - self.market[asset_in].mid * fill.v_in
            - self.arb.fixed_cost
        )
        self.arb_pnl += gain

    def _run_auction(self, at_epoch_boundary: bool) -> None:
        if not self.cfg.auction_enabled:
            return
        utils = {aid: self._utilisation(aid) for aid in self.sheet.asset_ids()}
        t_units = {aid: self.sheet.spools[aid].t_units for aid in self.sheet.asset_ids()}
        new_params, events = auction_step(
            self.auction_state,
            utils,
            t_units,
            self.params,
            self.targets,
            self.thresholds,
            self.reserve.balance_units,
            at_epoch_boundary=at_epoch_boundary,
            epoch_len=self.cfg.epoch_len,
        )
        self.params.update(new_params)
        for ev in events:
            treasury_update(self.reserve, upsilon_delta_units=ev.upsilon_units)
            self.sheet.adjust_rr(ev.asset_id, ev.upsilon_units, "auction")
            self.upsilon_topup_units += ev.upsilon_units
            self.logs["auction"].append(
                (
                    self.t,
                    ev.asset_id,
                    ev.side,
                    ev.regime,
                    ev.breach_clock,
                    ev.target,
                    ev.a_before,
                    ev.a_after,
                    int(ev.capped),
                )
            )
            self.logs["treasury"].append(
                (
                    self.t,
                    "upsilon",
                    ev.asset_id,
                    from_units(ev.upsilon_units),
                    self.reserve.balance,
                )
            )

    def step_epoch(self) -> None:
        cfg = self.cfg
        self.epoch += 1
        for aid in self.sheet.asset_ids():
            vp = self.vaults[aid]
            pool = self.sheet.pools[aid]
            before_long = vp.long.collateral_units
            before_short = vp.short.collateral_units
            settlement_units = {LONG: 0, SHORT: 0}
            flow_units = {LONG: 0, SHORT: 0}

            pos = self.positions.get(aid)
            if pos is not None and cfg.settlement_enabled:
                counterparty = (
                    vp.long if pos.direction == "protocol_pays_variable" else vp.short
                )
                side = LONG if counterparty is vp.long else SHORT
                outcome = settle_swaption(
                    pos, self.strike_bid[aid], self.curves[aid].bid, counterparty
                )
                signed = outcome.paid_units if outcome.vault_pays else -outcome.paid_units
                self.hedge_pnl_units += signed
                self.settlement_net_units += signed
                settlement_units[side] = -signed
                if margin_check(counterparty):
                    self._liquidate(aid, counterparty)

            t_now = self.sheet.spools[aid].t_units
            t_prev = self.epoch_t_units[aid]
            active_t = t_now if t_now != 0 else t_prev
            if active_t != 0 and (t_prev != 0 or t_now != 0):
                vault = vp.short if active_t > 0 else vp.long
                side = SHORT if active_t > 0 else LONG
                result = slp_premium_flow(t_prev, t_now, self.params[aid], vault)
                self.hedge_pnl_units -= result.applied_units
                self.slp_flow_net_units -= result.applied_units
                flow_units[side] += result.applied_units
                if result.liquidated:
                    self._liquidate(aid, vault)

            for asset_q, side_q, amount_q in [
                q for q in self.queued_vault_flows if q[0] == aid
            ]:
                vault = vp.by_side(side_q)
                if amount_q >= 0:
                    vault.deposit(amount_q)
                else:
                    vault.withdraw(-amount_q)
                self.vault_external_units += amount_q
                margin_check(vault)
            self.queued_vault_flows = [
                q for q in self.queued_vault_flows if q[0] != aid
            ]

            pending = self.rewards.pending_units(aid)
            if pending > 0:
                shares = treasury_mod.reward_distribute(
                    pool,
                    vp,
                    pending,
                    gamma=cfg.reward_gamma,
                    alpha=cfg.reward_alpha,
                )
                self.rewards.distribute(aid, shares)
                self.logs["treasury"].append(
                    (self.t, "reward", aid, from_units(pending), self.reserve.balance)
                )

            for side, vault in ((LONG, vp.long), (SHORT, vp.short)):
                before = before_long if side == LONG else before_short
                self.logs["vaults"].append(
                    (
                        self.epoch,
                        aid,
                        side,
                        from_units(before),
                        from_units(flow_units[side]),
                        from_units(settlement_units[side]),
                        vault.collateral,
                        int(vault.liquidated),
                    )
                )
        self._strike_all()

    def _liquidate(self, aid: str, vault: Vault) -> None:
        self.liquidations += 1
        self.positions[aid] = None  # exposure unwound on liquidation

    # ------------------------------------------------------------------
    # metrics, audit, run loop

    def solvency_margin_units(self) -> int:
        """Hedged protocol margin: inventory surplus plus protocol cash."""
        report = solvency_check(self.sheet, {a: c.bid for a, c in self.curves.items()})
        cash = (
            sum(s.t_units for s in self.sheet.spools.values())
            + sum(self.sheet.rr_units.values())
            + self.reserve.balance_units
            + self.hedge_pnl_units
        )
        return report.surplus_units + cash

    def unsettled_revaluation_units(self) -> int:
        """Curve move since epoch open, valued on current open inventory."""
        total = 0
        for aid in self.sheet.asset_ids():
            pool = self.sheet.pools[aid]
            notional = abs(pool.inventory - pool.lp_inventory)
            if notional == 0.0:
                continue
            now = integrate_eldf(self.curves[aid].bid, 0.0, notional)
            then = integrate_eldf(self.strike_bid[aid], 0.0, notional)
            total += abs(to_units(now) - to_units(then))
        return total

    def _emit_metrics(self) -> None:
        margin_units = self.solvency_margin_units()
        if self.min_margin_units is None or margin_units < self.min_margin_units:
            self.min_margin_units = margin_units
        report = solvency_check(self.sheet, {a: c.bid for a, c in self.curves.items()})
        rows = self.logs["metrics"]
        for aid in self.sheet.asset_ids():
            market = self.market[aid]
            util = self._utilisation(aid)
            self.max_utilisation = max(self.max_utilisation, util.u_rhs, util.u_lhs)
            rows.append((self.t, "mid", aid, market.mid))
            rows.append(
                (self.t, "il", aid, impermanent_loss(self.initial_mid[aid], market.mid))
            )
            rows.append((self.t, "t_open", aid, self.sheet.spools[aid].t))
            rows.append((self.t, "util_rhs", aid, util.u_rhs))
            rows.append((self.t, "util_lhs", aid, util.u_lhs))
        rows.append((self.t, "solvency_margin", "*", from_units(margin_units)))
        rows.append((self.t, "solvency_deficit_raw", "*", report.deficit))
        rows.append(
            (self.t, "unsettled_reval", "*", from_units(self.unsettled_revaluation_units()))
        )
        rows.append((self.t, "treasury", "*", self.reserve.balance))

    def _audit(self) -> None:
        checks = {
            "trade balance": self.total_v_s_units
            == self.total_v_prime_units
            + self.total_rp_units
            + self.total_fee_units,
            "fee split": self.total_fee_units
            == self.total_xi_units + self.total_reward_units,
            "premium reserve": sum(self.sheet.rr_units.values())
            == self.total_rp_units + self.upsilon_topup_units,
            "treasury identity": self.reserve.balance_units
            == self.reserve.cum_xi_units - self.reserve.cum_upsilon_units,
            "synthetic flows net": sum(
                s.t_units for s in self.sheet.spools.values()
            )
            == 0,
            "hedge book": self.hedge_pnl_units
            == self.settlement_net_units + self.slp_flow_net_units,
            "treasury vs xi": self.reserve.cum_xi_units == self.total_xi_units,
        }
        failed = [name for name, ok in checks.items() if not ok]
        if failed:
            self.halted = True
            self.diagnostic = f"conservation audit failed: {', '.join(failed)}"
            raise InvariantBreach(self.diagnostic)

    def run(self) -> RunArtifacts:
        try:
            while self.t < self.cfg.horizon and not self.halted:
                self.step_timestep()
        except (InvariantBreach, NegativeReserveInvariantBreach) as exc:
            self.halted = True
            self.diagnostic = str(exc)
        for row in self.rewards.claims():
            self.logs["rewards"].append(row)
        return RunArtifacts(logs=self.logs, summary=self._summary(), config=self.cfg)

    def _summary(self) -> dict:
        vault_now = sum(
            vp.long.collateral_units + vp.short.collateral_units
            for vp in self.vaults.values()
        )
        slp_pnl_units = vault_now - self.initial_vault_units - self.vault_external_units
        margin_units = self.solvency_margin_units() if not self.halted else 0
        return {
            "halted": self.halted,
            "diagnostic": self.diagnostic,
            "timesteps": self.t,
            "epochs": self.epoch,
            "fills": len(self.fills),
            "rejected": self.rejected,
            "final_treasury": self.reserve.balance,
            "trader_cost": from_units(self.trader_cost_units),
            "arb_pnl": self.arb_pnl,
            "slp_pnl": from_units(slp_pnl_units),
            "plp_rewards": from_units(
                sum(
                    units
                    for (aid, cls), units in self.rewards.claimable_units.items()
                    if cls == treasury_mod.PLP
                )
            ),
            "solvency_margin": from_units(margin_units),
            "min_solvency_margin": from_units(self.min_margin_units or 0),
            "max_utilisation": self.max_utilisation,
            "liquidations": self.liquidations,
        }


def run_scenario(cfg: ScenarioConfig) -> RunArtifacts:
    """Validate, build, and run a scenario to completion."""
    violations = cfg.validate()
    if violations:
        raise ConfigInvalid(violations)
    return Engine(cfg).run()
