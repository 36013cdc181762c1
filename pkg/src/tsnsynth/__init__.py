"""Configuration synthesis for Time-Sensitive Networking.

Given a network and redundancy/security-annotated applications, synthesizes
disjoint redundant routes, a TESLA key-disclosure interval, task schedules
and gate-control-list schedules; exactly on small instances, by simulated
annealing on large ones, with an independent verifier and a test-case
generator.
"""

from .annealer import SAParams, anneal, solve_pipeline_sa
from .errors import InfeasibleError, ModelError
from .exact import solve_pipeline_exact, solve_schedule_exact
from .model import (Application, EndSystem, GlobalConstants, Link, Network,
                    Stream, Switch, SystemModel, Task, communication_depth,
                    expand_security_model, hyperperiod, validate_model)
from .routing import (RouteAssignment, RouteTree, bandwidth_utilization,
                      check_routing_constraints, k_shortest_paths,
                      optimize_routes_exact, routing_cost)
from .solution import Schedule, Solution
from .tesla import auth_interval, earliest_auth_time, optimize_p_int
from .verify import fault_tolerance_check, verify_solution

__all__ = [
    "Application", "EndSystem", "GlobalConstants", "InfeasibleError", "Link",
    "ModelError", "Network", "RouteAssignment", "RouteTree", "SAParams",
    "Schedule", "Solution", "Stream", "Switch", "SystemModel", "Task",
    "anneal", "auth_interval", "bandwidth_utilization",
    "check_routing_constraints", "communication_depth", "earliest_auth_time",
    "expand_security_model", "fault_tolerance_check", "hyperperiod",
    "k_shortest_paths", "optimize_p_int", "optimize_routes_exact",
    "routing_cost", "solve_pipeline_exact", "solve_pipeline_sa",
    "solve_schedule_exact", "validate_model", "verify_solution",
]
