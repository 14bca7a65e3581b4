"""
Domain types for relays and the system, plus the per-relay controlled kernel

Each relay's queue follows X' = min(K, (X + mu*A - W)^+) where A ~ Bernoulli(f)
is the source->relay channel, W ~ Bernoulli(l) the relay->destination channel
and mu = 1 when the source sends to this relay in the slot.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DomainError

ROW_SUM_TOLERANCE = 1e-12


class PolicyName(str, Enum):
    """Relay selection policies, keyed by their config names"""

    RANDOM = "random"
    LOAD_BASED = "load"
    MMRS = "mmrs"
    MLRS = "mlrs"
    WHITTLE = "whittle"

    @classmethod
    def parse(cls, name: str) -> "PolicyName":
        try:
            return cls(name.strip().lower())
        except ValueError:
            known = ", ".join(p.value for p in cls)
            raise DomainError(f"Unknown policy '{name}' (expected one of: {known})") from None


class FailureMode(str, Enum):
    """What the source does with its head packet after a failed first hop"""

    RETRY = "retry"
    DROP = "drop"


@dataclass(frozen=True)
class RelayParams:
    """One relay: channel success probabilities, holding cost and buffer size"""

    f: float
    l: float
    C: float
    K: int

    def violations(self) -> List[Tuple[str, str]]:
        """Returns (field, message) for every violated invariant"""
        problems = []
        if not (isinstance(self.f, (int, float)) and 0.0 < self.f < 1.0):
            problems.append(("f", f"f must lie in (0, 1), got {self.f}"))
        if not (isinstance(self.l, (int, float)) and 0.0 < self.l < 1.0):
            problems.append(("l", f"l must lie in (0, 1), got {self.l}"))
        if not (isinstance(self.C, (int, float)) and math.isfinite(self.C) and self.C > 0):
            problems.append(("C", f"C must be positive, got {self.C}"))
        if isinstance(self.K, bool) or not isinstance(self.K, (int, np.integer)) or self.K < 1:
            problems.append(("K", f"K must be an integer >= 1, got {self.K}"))
        return problems

    def as_dict(self) -> Dict[str, float]:
        return {"f": float(self.f), "l": float(self.l), "C": float(self.C), "K": int(self.K)}


@dataclass(frozen=True)
class SystemConfig:
    """A full simulation setup"""

    relays: Tuple[RelayParams, ...]
    T: int
    seed: int
    policy: PolicyName = PolicyName.WHITTLE
    measure_from: int = 0
    on_fail: FailureMode = FailureMode.RETRY

    def __post_init__(self):
        object.__setattr__(self, "relays", tuple(self.relays))

    @property
    def M(self) -> int:
        return len(self.relays)

    @property
    def stable(self) -> bool:
        """min(l) > max(f): every relay's chain is positive recurrent on an unbounded buffer"""
        if not self.relays:
            return False
        return min(r.l for r in self.relays) > max(r.f for r in self.relays)

    def with_policy(self, policy: PolicyName) -> "SystemConfig":
        return SystemConfig(self.relays, self.T, self.seed, policy, self.measure_from, self.on_fail)

    def with_seed(self, seed: int) -> "SystemConfig":
        return SystemConfig(self.relays, self.T, seed, self.policy, self.measure_from, self.on_fail)


@dataclass(frozen=True)
class Action:
    active: bool

    @property
    def mu(self) -> int:
        return 1 if self.active else 0


ACTIVE = Action(True)
PASSIVE = Action(False)


@dataclass(frozen=True)
class TransitionRow:
    """Next-state distribution from one state under one action"""

    from_state: int
    action: Action
    entries: Tuple[Tuple[int, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        total = math.fsum(prob for _, prob in self.entries)
        if abs(total - 1.0) > ROW_SUM_TOLERANCE:
            raise AssertionError(f"Row from state {self.from_state} sums to {total!r}")
        states = [to for to, _ in self.entries]
        if states != sorted(set(states)):
            raise AssertionError(f"Row from state {self.from_state} is not strictly sorted: {states}")

    def prob(self, to_state: int) -> float:
        for to, p in self.entries:
            if to == to_state:
                return p
        return 0.0

    def as_dict(self) -> Dict[int, float]:
        return dict(self.entries)

    def expectation(self, values: Sequence[float]) -> float:
        return sum(p * values[to] for to, p in self.entries)


def _check_state(x: int, p: RelayParams) -> None:
    if not 0 <= x <= p.K:
        raise DomainError(f"State {x} outside [0, {p.K}]")


def active_row(x: int, p: RelayParams) -> TransitionRow:
    """Transition row when the source sends to this relay"""
    _check_state(x, p)
    f, l = p.f, p.l
    down = (1 - f) * l
    stay = (1 - f) * (1 - l) + f * l
    up = f * (1 - l)

    if x == 0:
        # a failed departure from an empty queue is no departure at all
        entries = ((0, (1 - f) + f * l), (1, up))
    elif x == p.K:
        # arrivals into a full buffer are suppressed
        entries = ((x - 1, down), (x, stay + up))
    else:
        entries = ((x - 1, down), (x, stay), (x + 1, up))
    return TransitionRow(x, ACTIVE, _drop_zero(entries))


def passive_row(x: int, p: RelayParams) -> TransitionRow:
    """Transition row when the source sends elsewhere"""
    _check_state(x, p)
    if x == 0:
        return TransitionRow(0, PASSIVE, ((0, 1.0),))
    return TransitionRow(x, PASSIVE, _drop_zero(((x - 1, p.l), (x, 1 - p.l))))


def _drop_zero(entries) -> Tuple[Tuple[int, float], ...]:
    kept = tuple((to, prob) for to, prob in entries if prob > 0.0)
    return kept or entries[:1]


def kernel_bands(p: RelayParams, active: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    The whole kernel for one action as three bands over states 0..K

    Returns (down, stay, up) where down[x] = P(x-1|x), stay[x] = P(x|x) and
    up[x] = P(x+1|x). down[0] and up[K] are always zero.
    """
    n = p.K + 1
    down = np.zeros(n)
    stay = np.zeros(n)
    up = np.zeros(n)
    row = active_row if active else passive_row
    for x in range(n):
        for to, prob in row(x, p).entries:
            if to == x - 1:
                down[x] = prob
            elif to == x:
                stay[x] = prob
            else:
                up[x] = prob
    return down, stay, up


def expected_next(bands: Tuple[np.ndarray, np.ndarray, np.ndarray], values: np.ndarray) -> np.ndarray:
    """E[V(X') | X = x] for every x, given kernel bands"""
    down, stay, up = bands
    out = stay * values
    out[1:] += down[1:] * values[:-1]
    out[:-1] += up[:-1] * values[1:]
    return out


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "warning" | "error"
    field: str
    message: str

    @property
    def is_error(self) -> bool:
        return self.level == "error"


def validate(config: SystemConfig) -> List[Diagnostic]:
    """Checks a configuration; never raises, the caller decides what is fatal"""
    diagnostics: List[Diagnostic] = []

    if config.M < 1:
        diagnostics.append(Diagnostic("error", "relays", "at least one relay is required"))
    if not isinstance(config.T, (int, np.integer)) or config.T < 1:
        diagnostics.append(Diagnostic("error", "T", f"T must be a positive integer, got {config.T}"))
    elif not 0 <= config.measure_from < config.T:
        diagnostics.append(Diagnostic(
            "error", "measure_from", f"measure_from must lie in [0, T), got {config.measure_from}"
        ))
    if not isinstance(config.seed, (int, np.integer)) or not 0 <= config.seed < 2 ** 64:
        diagnostics.append(Diagnostic("error", "seed", f"seed must be a 64-bit unsigned integer, got {config.seed}"))

    for i, relay in enumerate(config.relays):
        for name, message in relay.violations():
            diagnostics.append(Diagnostic("error", f"relays[{i}].{name}", message))

    if config.M >= 1 and not config.stable:
        min_l = min(r.l for r in config.relays)
        max_f = max(r.f for r in config.relays)
        diagnostics.append(Diagnostic(
            "warning", "relays",
            f"stability condition min(l) > max(f) fails ({min_l} <= {max_f}); "
            "queues are only kept finite by the buffer cap",
        ))

    return diagnostics
