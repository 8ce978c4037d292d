"""Edge-weight update rules (LTP/LTD) and the per-edge action logic.

Weights are integers in ``[1, C]``. Every rule produces a raw real-valued
update which is then rounded half away from zero and clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numba

from plasticflow.errors import ConfigurationError, ContractViolation


class RuleKind(str, Enum):
    AIMD = "aimd"
    AISD = "aisd"
    MIMD = "mimd"
    MISD = "misd"
    OJA = "oja"
    BANGBANG = "bangbang"
    MAXSEND = "maxsend"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @property
    def additive_increase(self) -> bool:
        return self in (RuleKind.AIMD, RuleKind.AISD)

    @property
    def multiplicative_increase(self) -> bool:
        return self in (RuleKind.MIMD, RuleKind.MISD)

    @property
    def subtractive_decrease(self) -> bool:
        return self in (RuleKind.AISD, RuleKind.MISD)

    @property
    def multiplicative_decrease(self) -> bool:
        return self in (RuleKind.AIMD, RuleKind.MIMD)

    @property
    def parametrized(self) -> bool:
        return self not in (RuleKind.BANGBANG, RuleKind.MAXSEND)


# integer codes used inside compiled kernels
AIMD, AISD, MIMD, MISD, OJA, BANGBANG, MAXSEND = range(7)
_KIND_CODES = {kind: code for code, kind in enumerate(RuleKind)}


class Action(IntEnum):
    NONE = 0
    LTP = 1
    LTD = 2


@dataclass(frozen=True)
class UpdateRule:
    """A weight-update rule with its increase/decrease parameters.

    ``ki`` and ``kd`` are ignored for Bang-Bang and Max-Send.
    """

    kind: RuleKind
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        validate_parameters(self.kind, self.ki, self.kd)

    @property
    def label(self) -> str:
        if not self.kind.parametrized:
            return self.kind.value
        return f"{self.kind.value}(ki={self.ki:g}, kd={self.kd:g})"


def ki_problem(kind: RuleKind, ki: float) -> str | None:
    """Why ``ki`` is illegal for ``kind``, or None."""
    kind = RuleKind(kind)
    if not math.isfinite(ki):
        return f"{kind.value}: ki must be finite, got {ki}"
    if kind.multiplicative_increase and not ki > 1:
        return f"{kind.value}: multiplicative increase needs ki > 1, got {ki}"
    if (kind.additive_increase or kind is RuleKind.OJA) and not ki > 0:
        return f"{kind.value}: additive increase needs ki > 0, got {ki}"
    return None


def kd_problem(kind: RuleKind, kd: float) -> str | None:
    """Why ``kd`` is illegal for ``kind``, or None."""
    kind = RuleKind(kind)
    if not math.isfinite(kd):
        return f"{kind.value}: kd must be finite, got {kd}"
    if kind.multiplicative_decrease and not 0 < kd < 1:
        return f"{kind.value}: multiplicative decrease needs 0 < kd < 1, got {kd}"
    if (kind.subtractive_decrease or kind is RuleKind.OJA) and not kd > 0:
        return f"{kind.value}: subtractive decrease needs kd > 0, got {kd}"
    return None


def validate_parameters(kind: RuleKind, ki: float, kd: float) -> None:
    kind = RuleKind(kind)
    if not kind.parametrized:
        return
    problem = ki_problem(kind, ki) or kd_problem(kind, kd)
    if problem:
        raise ConfigurationError(problem)


def decide_action(
    jam_on_self: bool,
    contributed_to_downstream_jam: bool,
    all_downstream_clear: bool,
    carried_data: bool,
) -> Action:
    """Choose LTP, LTD or nothing for one edge from this step's jam feedback.

    A jammed edge potentiates. Otherwise an edge that fed a jammed
    downstream edge depresses, and an edge whose downstream edges were all
    clear potentiates if it carried anything.
    """
    if contributed_to_downstream_jam and all_downstream_clear:
        raise ContractViolation(
            "an edge cannot both feed a downstream jam and see all downstream edges clear"
        )
    if jam_on_self:
        return Action.LTP
    if contributed_to_downstream_jam:
        return Action.LTD
    if all_downstream_clear and carried_data:
        return Action.LTP
    return Action.NONE


@numba.njit(cache=True)
def round_half_away(x):
    if x >= 0.0:
        return math.floor(x + 0.5)
    return -math.floor(-x + 0.5)


@numba.njit(cache=True)
def raw_update(code, action, w, demand, capacity, ki, kd):
    """Unrounded, unclamped weight after one action."""
    if action == 0:
        return w
    ltp = action == 1
    if code == MAXSEND:
        return capacity
    if code == BANGBANG:
        return capacity if ltp else 1.0
    if code == OJA:
        decay = demand * demand / (w * capacity)
        if ltp:
            return w + ki * (1.0 - decay)
        return w - kd * (1.0 + decay)
    if ltp:
        if code == AIMD or code == AISD:
            return w + ki
        return w * ki
    if code == AIMD or code == MIMD:
        return w * kd
    return w - kd


@numba.njit(cache=True)
def update_weight(code, action, w, demand, capacity, ki, kd):
    if action == 0:
        return w
    new = round_half_away(raw_update(code, action, float(w), float(demand), float(capacity), ki, kd))
    if new < 1.0:
        return 1
    if new > capacity:
        return capacity
    return int(new)


def apply(rule: UpdateRule, action: Action, w: int, demand: int, capacity: int) -> int:
    """Return the new integer weight of an edge after ``action``."""
    if capacity < 1:
        raise ContractViolation(f"capacity must be >= 1, got {capacity}")
    if not 1 <= w <= capacity:
        raise ContractViolation(f"weight {w} outside [1, {capacity}]")
    if demand < 0:
        raise ContractViolation(f"demand must be non-negative, got {demand}")
    return int(
        update_weight(
            rule.kind.code, int(Action(action)), int(w), int(demand), int(capacity),
            float(rule.ki), float(rule.kd),
        )
    )
