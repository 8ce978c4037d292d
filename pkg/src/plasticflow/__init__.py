"""Plasticity-inspired distributed flow control on store-and-forward networks."""

from plasticflow.analysis import OvershootResult, two_flow_oracle
from plasticflow.config import RunConfig, SweepSpec, parse_config
from plasticflow.engine import CongestionModel, Engine, FlowSpec, StepReport
from plasticflow.metrics import RunReport, bandwidth, drop_penalty, queue_penalty
from plasticflow.plasticity import Action, RuleKind, UpdateRule, apply, decide_action
from plasticflow.routing import Path, RoutingTable, build_routing_table, shortest_path
from plasticflow.topology import (
    NetworkGraph,
    NodeRole,
    attach_endpoints,
    build_scale_free_topology,
    build_uniform_topology,
    load_caida,
)

__all__ = [
    "Action", "CongestionModel", "Engine", "FlowSpec", "NetworkGraph", "NodeRole",
    "OvershootResult", "Path", "RoutingTable", "RuleKind", "RunConfig", "RunReport",
    "StepReport", "SweepSpec", "UpdateRule", "apply", "attach_endpoints", "bandwidth",
    "build_routing_table", "build_scale_free_topology", "build_uniform_topology",
    "decide_action", "drop_penalty", "load_caida", "parse_config", "queue_penalty",
    "shortest_path", "two_flow_oracle",
]
