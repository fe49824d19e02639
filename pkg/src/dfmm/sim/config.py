"""Scenario configuration: INI parsing and full-range validation.

A scenario file is sectioned key/value text. Global sections hold run,
fee, premium, auction, vault, trader, and arbitrageur parameters; each
[asset.<id>] section declares one asset with its external-market process
and initial deposits; optional [script] entries inject deterministic
trades at fixed timesteps.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from ..errors import ConfigInvalid, ParseError


@dataclass(frozen=True)
class AssetConfig:
    asset_id: str
    mid_price: float = 100.0
    sigma: float = 0.0
    drift: float = 0.0
    impact_alpha: float = 0.0
    depth: float = 1000.0
    n_points: int = 7
    spread: float = 0.002
    bid_slope: float = 0.05
    bid_curv: float = 0.02
    ask_slope: float = 0.05
    ask_curv: float = 0.02
    deposit: float = 1000.0
    c_long: float = 50000.0
    c_short: float = 50000.0


@dataclass(frozen=True)
class ScenarioConfig:
    # run
    horizon: int = 100
    epoch_len: int = 10
    slot_len: int = 1
    seed: int = 1
    # fees
    theta: float = 0.003
    xi: float = 0.001
    # premium function
    a_init: float = 5.0
    a_min: float = 1.0
    lam: float = 1.0
    d_min: float = 0.0001
    d_max: float = 0.001
    u_max: float = 1.0
    k: float = 2.0
    # auction
    auction_enabled: bool = True
    theta0: float = 0.25
    theta_star: float = 0.5
    theta_dagger: float = 0.75
    j_star: int = 4
    j_prime: int = 2
    j_dagger: int = 5
    # vaults
    rho_long: float = 0.5
    rho_short: float = 0.5
    margin_floor: float = 1.0
    settlement_enabled: bool = True
    # engine behaviour
    clamp_extrapolation: bool = True
    u_max_report: float = 10.0
    # rewards
    reward_gamma: float = 0.01
    reward_alpha: float = 1.0
    # trader flow
    trader_rate: float = 0.0
    trader_size_mu: float = 2.0
    trader_size_sigma: float = 0.5
    # arbitrageur
    arb_enabled: bool = False
    arb_fixed_cost: float = 0.0
    arb_haircut: float = 0.1
    arb_max_exposure: float = 5000.0
    # members
    assets: tuple = ()
    scripted_trades: tuple = ()

    def asset(self, asset_id: str) -> AssetConfig:
        for a in self.assets:
            if a.asset_id == asset_id:
                return a
        raise KeyError(asset_id)

    def validate(self) -> list[str]:
        """Itemised range violations; empty when the config is usable."""
        v: list[str] = []
        if self.horizon < 0:
            v.append(f"run.horizon must be >= 0, got {self.horizon}")
        if self.epoch_len < 1:
            v.append(f"run.epoch_len must be >= 1, got {self.epoch_len}")
        if self.slot_len < 1:
            v.append(f"run.slot_len must be >= 1, got {self.slot_len}")
        if not (0.0 <= self.theta < 1.0):
            v.append(f"fees.theta must be in [0, 1), got {self.theta}")
        if not (0.0 <= self.xi < 1.0):
            v.append(f"fees.xi must be in [0, 1), got {self.xi}")
        if self.xi > self.theta:
            v.append(f"fees.xi ({self.xi}) must not exceed fees.theta ({self.theta})")
        if self.a_min < 0:
            v.append(f"premium.a_min must be >= 0, got {self.a_min}")
        if self.a_init < self.a_min:
            v.append(
                f"premium.a_init ({self.a_init}) must be >= a_min ({self.a_min})"
            )
        if self.lam <= 0:
            v.append(f"premium.lambda must be > 0, got {self.lam}")
        if self.d_min < 0 or self.d_max < 0:
            v.append("premium.d_min and d_max must be >= 0")
        if self.d_min > self.d_max:
            v.append(
                f"premium.d_min ({self.d_min}) must not exceed d_max ({self.d_max})"
            )
        if self.u_max <= 0:
            v.append(f"premium.u_max must be > 0, got {self.u_max}")
        if self.k <= 0:
            v.append(f"premium.k must be > 0, got {self.k}")
        if not (0.0 <= self.theta0 <= self.theta_star <= self.theta_dagger <= 1.0):
            v.append(
                "auction thresholds must satisfy 0 <= theta0 <= theta_star <= "
                f"theta_dagger <= 1, got ({self.theta0}, {self.theta_star}, "
                f"{self.theta_dagger})"
            )
        if not (self.j_star >= self.j_prime >= 1):
            v.append(
                f"auction.j_star ({self.j_star}) must be >= j_prime "
                f"({self.j_prime}) >= 1"
            )
        if self.j_dagger < 1:
            v.append(f"auction.j_dagger must be >= 1, got {self.j_dagger}")
        for name, rho in (("rho_long", self.rho_long), ("rho_short", self.rho_short)):
            if not (0.0 < rho <= 1.0):
                v.append(f"vaults.{name} must be in (0, 1], got {rho}")
        if self.margin_floor < 0:
            v.append(f"vaults.margin_floor must be >= 0, got {self.margin_floor}")
        if self.u_max_report <= 0:
            v.append(f"engine.u_max_report must be > 0, got {self.u_max_report}")
        if not (0.0 <= self.reward_gamma < 1.0):
            v.append(f"rewards.gamma must be in [0, 1), got {self.reward_gamma}")
        if self.trader_rate < 0:
            v.append(f"traders.rate must be >= 0, got {self.trader_rate}")
        if not (0.0 <= self.arb_haircut < 1.0):
            v.append(f"arbitrageur.haircut must be in [0, 1), got {self.arb_haircut}")
        if self.arb_fixed_cost < 0:
            v.append(f"arbitrageur.fixed_cost must be >= 0, got {self.arb_fixed_cost}")
        if self.arb_max_exposure <= 0:
            v.append(
                f"arbitrageur.max_exposure must be > 0, got {self.arb_max_exposure}"
            )
        if len(self.assets) < 2:
            v.append(f"need at least 2 [asset.*] sections, got {len(self.assets)}")
        seen = set()
        for a in self.assets:
            tag = f"asset.{a.asset_id}"
            if a.asset_id in seen:
                v.append(f"duplicate asset id {a.asset_id}")
            seen.add(a.asset_id)
            if a.mid_price <= 0:
                v.append(f"{tag}.mid_price must be > 0, got {a.mid_price}")
            if a.sigma < 0:
                v.append(f"{tag}.sigma must be >= 0, got {a.sigma}")
            if a.depth <= 0:
                v.append(f"{tag}.depth must be > 0, got {a.depth}")
            if a.n_points < 3:
                v.append(f"{tag}.n_points must be >= 3, got {a.n_points}")
            if a.deposit <= 0:
                v.append(f"{tag}.deposit must be > 0, got {a.deposit}")
            if a.c_long < 0 or a.c_short < 0:
                v.append(f"{tag}.c_long and c_short must be >= 0")
            if a.spread < 0:
                v.append(f"{tag}.spread must be >= 0, got {a.spread}")
            # density must stay positive over the sampled depth
            if 1.0 - a.spread / 2.0 - a.bid_slope - a.bid_curv <= 0:
                v.append(f"{tag}: bid density hits zero inside the depth range")
        asset_ids = {a.asset_id for a in self.assets}
        for t, a_in, a_out, size in self.scripted_trades:
            if t < 1 or t > max(self.horizon, 1):
                v.append(f"script trade at t={t} outside [1, horizon]")
            if a_in not in asset_ids or a_out not in asset_ids:
                v.append(f"script trade references unknown asset {a_in}->{a_out}")
            if size <= 0:
                v.append(f"script trade size must be > 0, got {size}")
        return v

    def require_valid(self) -> "ScenarioConfig":
        violations = self.validate()
        if violations:
            raise ConfigInvalid(violations)
        return self


_SECTION_FIELDS = {
    "run": {"horizon": int, "epoch_len": int, "slot_len": int, "seed": int},
    "fees": {"theta": float, "xi": float},
    "premium": {
        "a_init": float,
        "a_min": float,
        "lambda": float,
        "d_min": float,
        "d_max": float,
        "u_max": float,
        "k": float,
    },
    "auction": {
        "enabled": bool,
        "theta0": float,
        "theta_star": float,
        "theta_dagger": float,
        "j_star": int,
        "j_prime": int,
        "j_dagger": int,
    },
    "vaults": {
        "rho_long": float,
        "rho_short": float,
        "margin_floor": float,
        "settlement_enabled": bool,
    },
    "engine": {"clamp_extrapolation": bool, "u_max_report": float},
    "rewards": {"gamma": float, "alpha": float},
    "traders": {"rate": float, "size_mu": float, "size_sigma": float},
    "arbitrageur": {
        "enabled": bool,
        "fixed_cost": float,
        "haircut": float,
        "max_exposure": float,
    },
}

_KEY_RENAMES = {
    ("premium", "lambda"): "lam",
    ("auction", "enabled"): "auction_enabled",
    ("vaults", "settlement_enabled"): "settlement_enabled",
    ("rewards", "gamma"): "reward_gamma",
    ("rewards", "alpha"): "reward_alpha",
    ("traders", "rate"): "trader_rate",
    ("traders", "size_mu"): "trader_size_mu",
    ("traders", "size_sigma"): "trader_size_sigma",
    ("arbitrageur", "enabled"): "arb_enabled",
    ("arbitrageur", "fixed_cost"): "arb_fixed_cost",
    ("arbitrageur", "haircut"): "arb_haircut",
    ("arbitrageur", "max_exposure"): "arb_max_exposure",
}

_ASSET_FIELD_TYPES = {
    f.name: f.type for f in fields(AssetConfig) if f.name != "asset_id"
}


def _convert(raw: str, type_name, where: str):
    try:
        if type_name is bool or type_name == "bool":
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if type_name is int or type_name == "int":
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def load_config(path, *, seed_override: int | None = None) -> ScenarioConfig:
    """Parse a scenario INI file into a ScenarioConfig (not yet validated)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ParseError(f"{path}: {exc}") from None

    kwargs: dict = {}
    for section, keys in _SECTION_FIELDS.items():
        if not parser.has_section(section):
            continue
        for key, value in parser.items(section):
            if key not in keys:
                raise ParseError(f"[{section}] has unknown key {key!r}")
            name = _KEY_RENAMES.get((section, key), key)
            kwargs[name] = _convert(value, keys[key], f"[{section}] {key}")

    assets = []
    for section in parser.sections():
        if not section.startswith("asset."):
            continue
        asset_id = section.split(".", 1)[1]
        akw: dict = {"asset_id": asset_id}
        for key, value in parser.items(section):
            if key not in _ASSET_FIELD_TYPES:
                raise ParseError(f"[{section}] has unknown key {key!r}")
            akw[key] = _convert(value, _ASSET_FIELD_TYPES[key], f"[{section}] {key}")
        assets.append(AssetConfig(**akw))
    kwargs["assets"] = tuple(sorted(assets, key=lambda a: a.asset_id))

    script = []
    if parser.has_section("script"):
        for key, value in parser.items("script"):
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 4:
                raise ParseError(
                    f"[script] {key}: expected 't, asset_in, asset_out, size'"
                )
            script.append(
                (
                    _convert(parts[0], int, f"[script] {key}"),
                    parts[1],
                    parts[2],
                    _convert(parts[3], float, f"[script] {key}"),
                )
            )
    kwargs["scripted_trades"] = tuple(script)

    cfg = ScenarioConfig(**kwargs)
    if seed_override is not None:
        cfg = replace(cfg, seed=seed_override)
    return cfg


SWEEPABLE = {
    f.name
    for f in fields(ScenarioConfig)
    if f.name not in ("assets", "scripted_trades", "seed")
}


def apply_overrides(cfg: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    """Replace declared scenario parameters; unknown keys are rejected."""
    bad = sorted(set(overrides) - SWEEPABLE)
    if bad:
        raise ParseError(f"unknown sweep parameter(s): {', '.join(bad)}")
    return replace(cfg, **overrides)
