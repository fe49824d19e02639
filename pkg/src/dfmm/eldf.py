"""External liquidity density curves.

A curve is a degree-2 polynomial in volume space: density(v) gives the
accounting-asset price per unit at cumulative depth v, so integrating the
curve over a volume interval converts volume to value and the inverse
solve converts value back to volume. Curves are fitted per slot from
venue snapshot points and are immutable once built.

Extrapolation beyond the fitted domain is an error by default because a
quadratic tail can go negative; curves built with clamped extrapolation
freeze the density at the boundary value instead, which scenario configs
may opt into.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    NoFeasibleRoot,
    NonMonotoneVolumes,
    NonPositiveDensity,
    OutOfDomain,
    ParseError,
    ReversedInterval,
    SolverDivergence,
    TooFewPoints,
)

BID = "bid"
ASK = "ask"
COMBINED = "combined"

_EXTRAPOLATION_MODES = ("error", "clamp")


@dataclass(frozen=True)
class CurvePoint:
    """One venue snapshot sample: cumulative depth and the price there."""

    volume: float
    price: float

    def __post_init__(self):
        if not self.price > 0:
            raise NonPositiveDensity(f"price must be positive, got {self.price}")
        if self.volume < 0:
            raise NonMonotoneVolumes(f"volume must be nonnegative, got {self.volume}")


@dataclass(frozen=True)
class Eldf:
    """Fitted density curve c2*v^2 + c1*v + c0 over [v_lo, v_hi]."""

    c2: float
    c1: float
    c0: float
    side: str = COMBINED
    slot_id: int = 0
    v_lo: float = 0.0
    v_hi: float = 1.0
    extrapolation: str = "error"

    def __post_init__(self):
        if not self.v_lo < self.v_hi:
            raise NonPositiveDensity(
                f"empty fit domain [{self.v_lo}, {self.v_hi}]"
            )
        if self.extrapolation not in _EXTRAPOLATION_MODES:
            raise ValueError(f"unknown extrapolation mode {self.extrapolation!r}")
        _check_positive_density(self.c2, self.c1, self.c0, self.v_lo, self.v_hi)

    @property
    def fit_domain(self) -> tuple[float, float]:
        return (self.v_lo, self.v_hi)

    def to_record(self) -> tuple:
        """(slot_id, side, c2, c1, c0, v_lo, v_hi) export row."""
        return (self.slot_id, self.side, self.c2, self.c1, self.c0, self.v_lo, self.v_hi)


def _check_positive_density(c2, c1, c0, v_lo, v_hi):
    """Density must be positive inside the fit domain.

    For a quadratic it suffices to check both endpoints plus the vertex
    when the vertex lies strictly inside. A zero exactly at a boundary is
    tolerated (the cumulative value stays strictly increasing inside),
    but a dip to zero or below in the interior, or a curve vanishing at
    both ends, is rejected.
    """
    q_lo = _poly(c2, c1, c0, v_lo)
    q_hi = _poly(c2, c1, c0, v_hi)
    if q_lo < 0.0 or q_hi < 0.0 or (q_lo == 0.0 and q_hi == 0.0):
        bad = v_lo if q_lo <= q_hi else v_hi
        raise NonPositiveDensity(
            f"density {_poly(c2, c1, c0, bad):.6g} at v={bad:.6g} is not positive"
        )
    if c2 != 0.0:
        vertex = -c1 / (2.0 * c2)
        if v_lo < vertex < v_hi and _poly(c2, c1, c0, vertex) <= 0.0:
            raise NonPositiveDensity(
                f"density dips to {_poly(c2, c1, c0, vertex):.6g} at v={vertex:.6g}"
            )


def _poly(c2, c1, c0, v):
    return (c2 * v + c1) * v + c0


def _antideriv(c2, c1, c0, v):
    return ((c2 / 3.0 * v + c1 / 2.0) * v + c0) * v


def fit_eldf(
    points: Sequence[CurvePoint],
    degree: int = 2,
    *,
    side: str = COMBINED,
    slot_id: int = 0,
    extrapolation: str = "error",
) -> Eldf:
    """Least-squares degree-2 fit of density over volume.

    The degree argument exists for forward compatibility; only 2 is
    accepted. Volumes must be strictly increasing. Exact degree-<=2 data
    is reproduced to fitting tolerance. Raises NonPositiveDensity when
    the fitted curve dips to zero or below anywhere inside the domain.
    """
    if degree != 2:
        raise ValueError(f"only degree-2 fits are supported, got {degree}")
    if len(points) < degree + 1:
        raise TooFewPoints(f"need at least {degree + 1} points, got {len(points)}")
    vols = np.array([p.volume for p in points], dtype=float)
    prices = np.array([p.price for p in points], dtype=float)
    if not np.all(np.diff(vols) > 0):
        raise NonMonotoneVolumes("snapshot volumes must be strictly increasing")

    # Normal equations with column scaling: columns of the Vandermonde
    # matrix are rescaled to unit max-norm so the 3x3 system stays well
    # conditioned even for large volume ranges.
    a = np.column_stack([np.ones_like(vols), vols, vols * vols])
    scale = np.maximum(np.abs(a).max(axis=0), 1e-300)
    a_s = a / scale
    ata = a_s.T @ a_s
    atb = a_s.T @ prices
    try:
        coef = np.linalg.solve(ata, atb) / scale
    except np.linalg.LinAlgError as exc:
        raise SolverDivergence(f"normal equations singular: {exc}") from None
    c0, c1, c2 = (float(c) for c in coef)
    return Eldf(
        c2=c2,
        c1=c1,
        c0=c0,
        side=side,
        slot_id=slot_id,
        v_lo=float(vols[0]),
        v_hi=float(vols[-1]),
        extrapolation=extrapolation,
    )


def _domain_check(curve: Eldf, v: float, tol: float = 1e-9):
    span = curve.v_hi - curve.v_lo
    slack = tol * max(1.0, span)
    if v < curve.v_lo - slack or v > curve.v_hi + slack:
        if curve.extrapolation == "error":
            raise OutOfDomain(
                f"v={v:.6g} outside fit domain [{curve.v_lo:.6g}, {curve.v_hi:.6g}]"
            )


def eval_eldf(curve: Eldf, v: float) -> float:
    """Density at depth v; clamped at the boundary in clamp mode."""
    _domain_check(curve, v)
    v_eff = min(max(v, curve.v_lo), curve.v_hi)
    return _poly(curve.c2, curve.c1, curve.c0, v_eff)


def integrate_eldf(curve: Eldf, v1: float, v2: float) -> float:
    """Value of the volume interval [v1, v2] under the curve.

    Additive over adjacent intervals. In clamp mode, the part of the
    interval outside the fit domain contributes boundary density times
    length.
    """
    if v2 < v1:
        raise ReversedInterval(f"v2={v2} < v1={v1}")
    _domain_check(curve, v1)
    _domain_check(curve, v2)
    lo, hi = curve.v_lo, curve.v_hi
    a1, a2 = min(max(v1, lo), hi), min(max(v2, lo), hi)
    total = _antideriv(curve.c2, curve.c1, curve.c0, a2) - _antideriv(
        curve.c2, curve.c1, curve.c0, a1
    )
    if v1 < lo:
        total += (min(v2, lo) - v1) * _poly(curve.c2, curve.c1, curve.c0, lo)
    if v2 > hi:
        total += (v2 - max(v1, hi)) * _poly(curve.c2, curve.c1, curve.c0, hi)
    return total


def _cubic_real_roots(a3: float, a2: float, a1: float, a0: float) -> list[float]:
    """Real roots of a3 x^3 + a2 x^2 + a1 x + a0 = 0 (closed form).

    Handles quadratic/linear degeneracies. Depressed-cubic solution with
    the trigonometric branch for three real roots.
    """
    eps = 1e-14 * max(abs(a3), abs(a2), abs(a1), abs(a0), 1.0)
    if abs(a3) <= eps:
        if abs(a2) <= eps:
            if abs(a1) <= eps:
                return []
            return [-a0 / a1]
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        return [(-a1 - sq) / (2.0 * a2), (-a1 + sq) / (2.0 * a2)]

    b, c, d = a2 / a3, a1 / a3, a0 / a3
    # x = y - b/3 reduces to y^3 + p y + q = 0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0:
        sq = math.sqrt(disc)
        u = math.copysign(abs(-q / 2.0 + sq) ** (1.0 / 3.0), -q / 2.0 + sq)
        w = math.copysign(abs(-q / 2.0 - sq) ** (1.0 / 3.0), -q / 2.0 - sq)
        return [u + w + shift]
    if abs(p) < 1e-300:
        return [shift]
    # three real roots (disc <= 0 implies p < 0)
    r = math.sqrt(-p / 3.0)
    arg = max(-1.0, min(1.0, 3.0 * q / (2.0 * p * r)))
    phi = math.acos(arg)
    return [2.0 * r * math.cos((phi - 2.0 * math.pi * k) / 3.0) + shift for k in range(3)]


def solve_volume_for_value(curve: Eldf, v1: float, target_value: float) -> float:
    """Smallest v2 >= v1 with integrate_eldf(curve, v1, v2) == target_value.

    Closed-form cubic roots followed by Newton polish on the residual.
    Because the density is positive over the domain the cumulative value
    is strictly increasing there, so the in-domain root is unique. In
    clamp mode, value beyond the domain capacity is sourced at the
    boundary density.
    """
    if target_value < 0:
        raise NoFeasibleRoot(f"target value must be nonnegative, got {target_value}")
    _domain_check(curve, v1)
    if target_value == 0.0:
        return v1
    c2, c1, c0 = curve.c2, curve.c1, curve.c0
    lo, hi = curve.v_lo, curve.v_hi
    v1_eff = min(max(v1, lo), hi)
    capacity = integrate_eldf(curve, v1, hi)
    if target_value > capacity:
        if curve.extrapolation == "clamp":
            tail_density = _poly(c2, c1, c0, hi)
            return hi + (target_value - capacity) / tail_density
        raise NoFeasibleRoot(
            f"book can source only {capacity:.6g} from v1={v1:.6g}, "
            f"requested {target_value:.6g}"
        )

    # Roots of F(v2) - (F(v1) + M) where F is the antiderivative; the part
    # of [v1, v1_eff] below the domain was already valued at clamp density.
    head = integrate_eldf(curve, v1, v1_eff)
    konst = _antideriv(c2, c1, c0, v1_eff) + (target_value - head)
    roots = _cubic_real_roots(c2 / 3.0, c1 / 2.0, c0, -konst)
    span = hi - lo
    slack = 1e-9 * max(1.0, span)
    feasible = sorted(r for r in roots if v1_eff - slack <= r <= hi + slack)
    if not feasible:
        raise NoFeasibleRoot(
            f"no real root in [{v1_eff:.6g}, {hi:.6g}] for value {target_value:.6g}"
        )
    v2 = min(max(feasible[0], v1_eff), hi)

    # Newton polish: density is positive in-domain so iteration is stable.
    for _ in range(8):
        resid = (
            _antideriv(c2, c1, c0, v2) - _antideriv(c2, c1, c0, v1_eff)
        ) - (target_value - head)
        dens = _poly(c2, c1, c0, v2)
        if dens <= 0:
            break
        step = resid / dens
        v2 = min(max(v2 - step, v1_eff), hi)
        if abs(step) < 1e-15 * max(1.0, abs(v2)):
            break
    final = integrate_eldf(curve, v1, v2)
    if abs(final - target_value) > 1e-6 * max(1.0, target_value):
        raise SolverDivergence(
            f"cubic solve residual {final - target_value:.3g} for M={target_value:.6g}"
        )
    return v2


def snapshot_to_curves(
    raw: Sequence[CurvePoint],
    mode: str = COMBINED,
    *,
    mid_price: float | None = None,
    slot_id: int = 0,
    extrapolation: str = "error",
):
    """Fit snapshot points into one combined curve or a (bid, ask) pair.

    Split mode partitions at mid_price: points priced at or below mid are
    the bid side, above are the ask side. Each side is re-based so depth
    starts at zero nearest the mid (bid depth grows as price falls, ask
    depth as price rises), making both sides integrable from zero.
    """
    if not raw:
        raise TooFewPoints("empty snapshot")
    if mode == COMBINED:
        return fit_eldf(
            raw, side=COMBINED, slot_id=slot_id, extrapolation=extrapolation
        )
    if mode != "split":
        raise ValueError(f"unknown snapshot mode {mode!r}")
    if mid_price is None:
        raise ValueError("split mode requires mid_price")

    bid_raw = [p for p in raw if p.price <= mid_price]
    ask_raw = [p for p in raw if p.price > mid_price]
    if len(bid_raw) < 3:
        raise TooFewPoints(f"bid side has {len(bid_raw)} points, need 3")
    if len(ask_raw) < 3:
        raise TooFewPoints(f"ask side has {len(ask_raw)} points, need 3")

    # Bid points sit below the mid on the shared volume axis; the point
    # nearest the mid is the best bid, so depth counts downward from it.
    v_best_bid = max(p.volume for p in bid_raw)
    bid_pts = sorted(
        (CurvePoint(v_best_bid - p.volume, p.price) for p in bid_raw),
        key=lambda p: p.volume,
    )
    v_best_ask = min(p.volume for p in ask_raw)
    ask_pts = sorted(
        (CurvePoint(p.volume - v_best_ask, p.price) for p in ask_raw),
        key=lambda p: p.volume,
    )
    bid = fit_eldf(bid_pts, side=BID, slot_id=slot_id, extrapolation=extrapolation)
    ask = fit_eldf(ask_pts, side=ASK, slot_id=slot_id, extrapolation=extrapolation)
    return bid, ask


def parse_snapshot_lines(lines: Iterable[str]) -> dict:
    """Parse venue snapshot records: slot_id, venue_id, volume, price.

    Returns {(slot_id, venue_id): [CurvePoint, ...]} preserving record
    order. Blank lines and '#' comments are skipped.
    """
    out: dict = {}
    for n, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ParseError(f"line {n}: expected 4 fields, got {len(parts)}")
        try:
            slot = int(parts[0])
            venue = parts[1]
            vol = float(parts[2])
            price = float(parts[3])
        except ValueError as exc:
            raise ParseError(f"line {n}: {exc}") from None
        out.setdefault((slot, venue), []).append(CurvePoint(vol, price))
    return out


def load_snapshot_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_snapshot_lines(fh)


@dataclass
class AssetCurves:
    """Current-slot bid/ask curves plus the traded-volume marks.

    Marks track cumulative volume consumed on each side within the slot
    so successive trades walk along the curve; they reset when the slot
    rolls and fresh curves are fitted.
    """

    asset_id: str
    bid: Eldf
    ask: Eldf
    bid_mark: float = 0.0
    ask_mark: float = 0.0

    def reset(self, bid: Eldf, ask: Eldf) -> None:
        self.bid = bid
        self.ask = ask
        self.bid_mark = 0.0
        self.ask_mark = 0.0
