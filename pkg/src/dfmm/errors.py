"""Exception taxonomy for the engine.

Every error raised by engine modules derives from EngineError so callers
(and the CLI) can distinguish engine failures from programming errors.
InvariantBreach is reserved for fail-stop conditions: the run halts and
logs are preserved.
"""


class EngineError(Exception):
    pass


# --- curve construction / evaluation ---

class TooFewPoints(EngineError):
    pass


class NonMonotoneVolumes(EngineError):
    pass


class NonPositiveDensity(EngineError):
    pass


class OutOfDomain(EngineError):
    pass


class ReversedInterval(EngineError):
    pass


class NoFeasibleRoot(EngineError):
    pass


class SolverDivergence(EngineError):
    pass


# --- ledger ---

class NonPositiveAmount(EngineError):
    pass


class ExceedsLpClaim(EngineError):
    pass


class ValuationUnavailable(EngineError):
    pass


class NegativeFlow(EngineError):
    pass


# --- pricing ---

class NoFeasibleSolution(EngineError):
    pass


class ExceedsCapacity(EngineError):
    pass


class CurveUnavailable(EngineError):
    pass


class StaleQuote(EngineError):
    pass


class InsufficientInventory(EngineError):
    pass


# --- vaults ---

class ZeroCapacity(EngineError):
    pass


class BadParams(EngineError):
    pass


class ZeroPrevValue(EngineError):
    pass


class NoCounterpartyCollateral(EngineError):
    pass


# --- auction ---

class NoTargetInOptimal(EngineError):
    pass


class InactiveSide(EngineError):
    pass


# --- treasury ---

class BadRate(EngineError):
    pass


class BadRates(EngineError):
    pass


class NegativeReserveInvariantBreach(EngineError):
    """Treasury balance went negative: the auction cap logic is broken."""


# --- metrics ---

class NonPositivePrice(EngineError):
    pass


class ReversedBounds(EngineError):
    pass


class DegenerateAllAtMarket(EngineError):
    pass


# --- simulation / cli ---

class ConfigInvalid(EngineError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ParseError(EngineError):
    pass


class UnknownLogKind(EngineError):
    pass


class CorruptManifest(EngineError):
    pass


class InvariantBreach(EngineError):
    """Fatal fail-stop: engine state violated a hard invariant."""
