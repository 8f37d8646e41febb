"""Cluster-processor placement and fronthaul routing."""

from .model import MilpModel, TrafficDemand, build_milp, du_capacity
from .solver import MilpSolution, SolverConfig, improve_with_placement, placement, solve_milp, with_placement
from .topology import FronthaulGraph, default_topology, load_topology, save_topology
from .validate import LinkLoadReport, ValidationReport, link_load_report, validate_solution

__all__ = [
    "FronthaulGraph",
    "LinkLoadReport",
    "MilpModel",
    "MilpSolution",
    "SolverConfig",
    "TrafficDemand",
    "ValidationReport",
    "build_milp",
    "default_topology",
    "du_capacity",
    "improve_with_placement",
    "link_load_report",
    "placement",
    "load_topology",
    "save_topology",
    "solve_milp",
    "validate_solution",
    "with_placement",
]
