"""Two-flow transient overshoot: closed forms and a micro-simulation.

A link of fixed weight C serves flow 1 at full rate (w1 = C) when flow 2
joins with w2 = 1. The jam triggers one LTD on both upstream weights,
after which both potentiate every step until their sum exceeds C again.
The overshoot is that sum minus C; n is the number of LTP steps taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from plasticflow.errors import ConfigurationError
from plasticflow.plasticity import (
    Action,
    RuleKind,
    UpdateRule,
    raw_update,
    round_half_away,
    validate_parameters,
)


@dataclass(frozen=True)
class OvershootResult:
    """``n is None`` means congestion never re-occurred."""

    overshoot: float
    n: int | None

    @property
    def never(self) -> bool:
        return self.n is None


OPTIMAL = OvershootResult(0.0, None)


def _check(kind: RuleKind, capacity: float, ki: float, kd: float, n: int) -> None:
    validate_parameters(kind, ki, kd)
    if not capacity > 0:
        raise ConfigurationError(f"capacity must be positive, got {capacity}")
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")


def overshoot_aimd(capacity: float, ki: float, kd: float, n: int) -> float:
    _check(RuleKind.AIMD, capacity, ki, kd, n)
    return 2 * n * ki + capacity * (kd - 1)


def overshoot_aisd(capacity: float, ki: float, kd: float, n: int) -> float:
    _check(RuleKind.AISD, capacity, ki, kd, n)
    return 2 * (n * ki - kd)


def overshoot_mimd(capacity: float, ki: float, kd: float, n: int) -> float:
    _check(RuleKind.MIMD, capacity, ki, kd, n)
    return capacity * (kd * ki**n - 1)


def overshoot_misd(capacity: float, ki: float, kd: float, n: int) -> float:
    _check(RuleKind.MISD, capacity, ki, kd, n)
    return capacity * (ki**n - 1)


def exact_overshoot(kind: RuleKind, capacity: float, ki: float, kd: float, n: int) -> float:
    """Sum-minus-C of the unfloored, unrounded trajectory, without dropping small terms."""
    kind = RuleKind(kind)
    _check(kind, capacity, ki, kd, n)
    if kind is RuleKind.AIMD:
        return (capacity * kd + n * ki) + (kd + n * ki) - capacity
    if kind is RuleKind.AISD:
        return 2 * (n * ki - kd) + 1
    if kind is RuleKind.MIMD:
        return kd * ki**n * (capacity + 1) - capacity
    if kind is RuleKind.MISD:
        return ki**n * (capacity - 2 * kd + 1) - capacity
    raise ConfigurationError(f"no closed form for {kind.value}")


FORMULAS = {
    RuleKind.AIMD: overshoot_aimd,
    RuleKind.AISD: overshoot_aisd,
    RuleKind.MIMD: overshoot_mimd,
    RuleKind.MISD: overshoot_misd,
}


def analytic_overshoot(rule: UpdateRule, capacity: float, n: int) -> float:
    try:
        formula = FORMULAS[rule.kind]
    except KeyError:
        raise ConfigurationError(f"no closed form for {rule.kind.value}") from None
    return formula(capacity, rule.ki, rule.kd, n)


def two_flow_oracle(
    rule: UpdateRule,
    capacity: int,
    max_steps: int = 100_000,
    rounding: bool = True,
    floor: bool = True,
) -> OvershootResult:
    """Measure overshoot and n for the two-flow single-bottleneck scenario.

    With ``rounding`` and ``floor`` on, weights follow the engine's
    conventions (round half away from zero, minimum 1). Upstream links are
    not limiting, so there is no upper clamp at C. Oja sees the shared
    link's traffic w1 + w2 as its activity term. If congestion never comes
    back within ``max_steps``, ``n`` is None and the overshoot is the last
    (negative) headroom.
    """
    if capacity < 2:
        raise ConfigurationError(f"capacity must be >= 2, got {capacity}")
    if max_steps < 1:
        raise ConfigurationError(f"max_steps must be >= 1, got {max_steps}")
    code, ki, kd, cap = rule.kind.code, float(rule.ki), float(rule.kd), float(capacity)

    def update(action, w, total):
        new = raw_update(code, int(action), w, total, cap, ki, kd)
        if rounding:
            new = float(round_half_away(new))
        if floor:
            new = max(new, 1.0)
        return new

    w1, w2 = cap, 1.0
    total = w1 + w2
    w1, w2 = update(Action.LTD, w1, total), update(Action.LTD, w2, total)
    for n in range(1, max_steps + 1):
        total = w1 + w2
        prev = (w1, w2)
        w1, w2 = update(Action.LTP, w1, total), update(Action.LTP, w2, total)
        if w1 + w2 > cap:
            return OvershootResult(w1 + w2 - cap, n)
        if (w1, w2) == prev:
            break  # fixed point below C: congestion can never return
    return OvershootResult(w1 + w2 - cap, None)


# Increase parameters come from the rule's increase family, decrease
# parameters from its decrease family.
PARAMETER_SETS = {
    "balanced": {"additive": (1.0, 5.0), "multiplicative": (1.1, 0.5)},
    "aggressive_increase": {"additive": (100.0, 5.0), "multiplicative": (1.5, 0.5)},
    "aggressive_decrease": {"additive": (1.0, 100.0), "multiplicative": (1.1, 0.1)},
}


def rule_for_set(kind: RuleKind, set_name: str) -> UpdateRule:
    kind = RuleKind(kind)
    params = PARAMETER_SETS[set_name]
    add_ki, add_kd = params["additive"]
    mul_ki, mul_kd = params["multiplicative"]
    if kind is RuleKind.OJA:
        return UpdateRule(kind, add_ki, add_kd)
    ki = mul_ki if kind.multiplicative_increase else add_ki
    kd = mul_kd if kind.multiplicative_decrease else add_kd
    return UpdateRule(kind, ki, kd)


TABLE_RULES = ("aimd", "aisd", "mimd", "misd", "oja", "opt")


@dataclass(frozen=True)
class OvershootRow:
    rule: str
    parameter_set: str
    ki: float
    kd: float
    analytic: float
    simulated: float
    n: int | None


def overshoot_table(capacity: int, max_steps: int = 100_000) -> list[OvershootRow]:
    """Closed form (at the measured n) and oracle values for every rule and parameter set."""
    rows = []
    for name in TABLE_RULES:
        for set_name in PARAMETER_SETS:
            if name == "opt":
                rows.append(OvershootRow(name, set_name, math.nan, math.nan, 0.0, 0.0, None))
                continue
            rule = rule_for_set(RuleKind(name), set_name)
            measured = two_flow_oracle(rule, capacity, max_steps)
            if rule.kind in FORMULAS and measured.n is not None:
                analytic = analytic_overshoot(rule, capacity, measured.n)
            else:
                analytic = math.nan
            rows.append(
                OvershootRow(
                    name, set_name, rule.ki, rule.kd, analytic, measured.overshoot, measured.n
                )
            )
    return rows
