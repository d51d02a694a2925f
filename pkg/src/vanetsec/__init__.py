"""Survival of a warning message relayed by majority vote through a road with malicious vehicles."""

from .analytic import BroadcastLayout, analytic_p_succ, analytic_p_succ_given_n, conditional_success_probability
from .connectivity import LogNormal, UnitDisk, link_probability
from .oracle import exact_p_succ_fixed, exact_p_succ_marginal
from .simulation import Estimate, estimate_p_succ, run_trial
from .topology import Scenario, Topology, sample_topology

__all__ = [
    "BroadcastLayout",
    "Estimate",
    "LogNormal",
    "Scenario",
    "Topology",
    "UnitDisk",
    "analytic_p_succ",
    "analytic_p_succ_given_n",
    "conditional_success_probability",
    "estimate_p_succ",
    "exact_p_succ_fixed",
    "exact_p_succ_marginal",
    "link_probability",
    "run_trial",
    "sample_topology",
]
