"""Experiment configuration: flat ``key = value`` files with ``#`` comments.

Example::

    topology = uniform
    num_routers = 100
    capacity = 100
    rule = aimd, aisd
    grid = full
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from plasticflow.engine import CongestionModel
from plasticflow.errors import ParseError
from plasticflow.plasticity import RuleKind, UpdateRule, kd_problem, ki_problem

TOPOLOGIES = ("uniform", "scale_free", "caida")
GRIDS = ("single", "full", "custom")


def _grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    count = int(round((hi - lo) / step)) + 1
    return tuple(float(v) for v in np.round(lo + step * np.arange(count), 10))


ADDITIVE_GRID = _grid(1.0, 9.0, 1.0)
MULTIPLICATIVE_INCREASE_GRID = _grid(1.1, 1.9, 0.1)
MULTIPLICATIVE_DECREASE_GRID = _grid(0.1, 0.9, 0.1)


@dataclass(frozen=True)
class SweepSpec:
    kind: RuleKind
    ki_values: tuple[float, ...]
    kd_values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if self.kind.parametrized:
            for v in self.ki_values:
                if problem := ki_problem(self.kind, v):
                    raise ValueError(problem)
            for v in self.kd_values:
                if problem := kd_problem(self.kind, v):
                    raise ValueError(problem)

    def rules(self) -> list[UpdateRule]:
        if not self.kind.parametrized:
            return [UpdateRule(self.kind)]
        return [UpdateRule(self.kind, ki, kd) for ki in self.ki_values for kd in self.kd_values]

    def __len__(self):
        return len(self.rules())


def full_grid(kind: RuleKind) -> SweepSpec:
    """Standard sweep ranges. Oja takes the additive and subtractive ranges."""
    kind = RuleKind(kind)
    if not kind.parametrized:
        return SweepSpec(kind, (0.0,), (0.0,))
    ki = MULTIPLICATIVE_INCREASE_GRID if kind.multiplicative_increase else ADDITIVE_GRID
    kd = MULTIPLICATIVE_DECREASE_GRID if kind.multiplicative_decrease else ADDITIVE_GRID
    return SweepSpec(kind, ki, kd)


@dataclass(frozen=True)
class RunConfig:
    topology: str
    rules: tuple[RuleKind, ...]
    num_routers: int = 100
    router_degree: int = 6
    attach_m: int = 3
    caida_path: str | None = None
    num_sources: int | None = None
    num_targets: int | None = None
    capacity: int = 1000
    load_multiplier: int = 100
    model: CongestionModel = CongestionModel.DROP
    ki: float | None = None
    kd: float | None = None
    grid: str = "single"
    ki_values: tuple[float, ...] = ()
    kd_values: tuple[float, ...] = ()
    num_flows: int | None = None
    seed: int = 0
    repeats: int = 25
    max_steps: int = 10_000
    rush_start: int | None = None
    rush_end: int | None = None
    rush_flows: int = 0
    series_bin: int = 100
    weight_bin: int = 10
    params_from: str | None = None
    slack: float = 0.01
    workers: int = 1
    output_dir: str = "results"

    @property
    def load(self) -> int:
        return self.load_multiplier * self.capacity

    @property
    def sources(self) -> int:
        return self.num_sources if self.num_sources is not None else self.num_routers

    @property
    def targets(self) -> int:
        return self.num_targets if self.num_targets is not None else self.num_routers

    @property
    def flows(self) -> int:
        return self.num_flows if self.num_flows is not None else self.sources

    @property
    def schedule_window(self) -> tuple[int, int] | None:
        if self.rush_flows <= 0:
            return None
        return (self.rush_start, self.rush_end)

    def sweeps(self) -> list[SweepSpec]:
        out = []
        for kind in self.rules:
            if self.grid == "full":
                out.append(full_grid(kind))
            elif not kind.parametrized:
                out.append(SweepSpec(kind, (0.0,), (0.0,)))
            elif self.grid == "custom":
                out.append(SweepSpec(kind, self.ki_values, self.kd_values))
            else:
                out.append(SweepSpec(kind, (self.ki,), (self.kd,)))
        return out

    def with_output(self, output_dir: str) -> RunConfig:
        return replace(self, output_dir=output_dir)


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _floats(text: str) -> tuple[float, ...]:
    return tuple(_float(v) for v in text.split(",") if v.strip())


def _rules(text: str) -> tuple[RuleKind, ...]:
    kinds = tuple(RuleKind(v.strip().lower()) for v in text.split(",") if v.strip())
    if not kinds:
        raise ValueError("empty rule list")
    return kinds


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


_PARSERS = {
    "topology": _choice(TOPOLOGIES),
    "rule": _rules,
    "num_routers": _int,
    "router_degree": _int,
    "attach_m": _int,
    "caida_path": str,
    "num_sources": _int,
    "num_targets": _int,
    "capacity": _int,
    "load_multiplier": _int,
    "model": CongestionModel,
    "ki": _float,
    "kd": _float,
    "grid": _choice(GRIDS),
    "ki_values": _floats,
    "kd_values": _floats,
    "num_flows": _int,
    "seed": _int,
    "repeats": _int,
    "max_steps": _int,
    "rush_start": _int,
    "rush_end": _int,
    "rush_flows": _int,
    "series_bin": _int,
    "weight_bin": _int,
    "params_from": str,
    "slack": _float,
    "workers": _int,
    "output_dir": str,
}
REQUIRED = ("topology", "rule")
_POSITIVE = (
    "num_routers", "capacity", "load_multiplier", "repeats", "max_steps",
    "series_bin", "weight_bin", "workers",
)
_NON_NEGATIVE = (
    "router_degree", "attach_m", "num_sources", "num_targets", "num_flows",
    "rush_start", "rush_end", "rush_flows", "seed",
)


def parse_config_text(text: str, base_dir: Path | None = None) -> RunConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _PARSERS:
            raise ParseError("unknown key", key=key, line=lineno)
        if key in values:
            raise ParseError(f"duplicate key (first set on line {lines[key]})", key=key, line=lineno)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ParseError(f"bad value {value!r}: {exc}", key=key, line=lineno) from None
        lines[key] = lineno

    def fail(message: str, key: str):
        raise ParseError(message, key=key, line=lines.get(key))

    for key in REQUIRED:
        if key not in values:
            fail("missing required key", key)
    for key in _POSITIVE:
        if key in values and values[key] < 1:
            fail(f"must be >= 1, got {values[key]}", key)
    for key in _NON_NEGATIVE:
        if key in values and values[key] < 0:
            fail(f"must be >= 0, got {values[key]}", key)
    if "slack" in values and values["slack"] < 0:
        fail("must be >= 0", "slack")

    rules = values.pop("rule")
    grid = values.get("grid", "single")
    parametrized = [k for k in rules if k.parametrized]
    if grid == "single" and parametrized and "params_from" not in values:
        if len(parametrized) > 1:
            fail("grid = single takes one parametrized rule unless params_from is set", "rule")
        for key in ("ki", "kd"):
            if key not in values:
                fail(f"required for rule {parametrized[0].value}", key)
    if grid == "custom":
        for key in ("ki_values", "kd_values"):
            if not values.get(key):
                fail("required for grid = custom", key)
    for kind in parametrized:
        checks = []
        if grid == "single":
            checks = [("ki", values.get("ki"), ki_problem), ("kd", values.get("kd"), kd_problem)]
        elif grid == "custom":
            checks = [(k, v, p) for k, p in (("ki_values", ki_problem), ("kd_values", kd_problem))
                      for v in values[k]]
        for key, value, problem in checks:
            if value is not None and (msg := problem(kind, value)):
                fail(msg, key)

    if values.get("topology") == "caida" and "caida_path" not in values:
        fail("required for topology = caida", "caida_path")
    if values.get("rush_flows", 0) > 0:
        for key in ("rush_start", "rush_end"):
            if key not in values:
                fail("required when rush_flows > 0", key)
        if values["rush_end"] < values["rush_start"]:
            fail("rush window ends before it starts", "rush_end")
    for key in ("caida_path", "params_from"):
        if key in values and base_dir is not None:
            path = Path(values[key])
            if not path.is_absolute():
                values[key] = str(base_dir / path)
    return RunConfig(rules=rules, **values)


def parse_config(path) -> RunConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), base_dir=path.parent)


def format_config(config: RunConfig) -> str:
    """Inverse of ``parse_config_text`` for non-default fields."""
    out = [f"rule = {', '.join(k.value for k in config.rules)}"]
    for f in fields(config):
        if f.name == "rules":
            continue
        value = getattr(config, f.name)
        if value == f.default or value is None:
            continue
        if isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        elif isinstance(value, CongestionModel):
            value = value.value
        out.append(f"{f.name} = {value}")
    return "\n".join(out) + "\n"
