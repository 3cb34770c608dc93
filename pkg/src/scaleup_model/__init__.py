"""Analytical training-time and optical interconnect model for MoE clusters."""
from .collectives import (CollectiveCost, DomainMap, Kind, LinkClass, all_gather, all_reduce,
                          all_to_all, hierarchical_collective, hierarchical_cost, hockney,
                          reduce_scatter)
from .errors import ConfigError
from .model import (CommVolumes, ModelConfig, WorkloadConfig, comm_volumes,
                    flops_per_token_forward, param_count)
from .placement import (ClusterConfig, ParallelismConfig, PlacementMap, build_placement,
                        expert_replica_count)
from .scenario import ResultRow, Scenario, load_scenario, reproduce, run, sweep
from .step_time import (Knobs, StepBreakdown, compute_time, dp_sync_time, ep_time,
                        pp_bubble_factor, step_time, tp_time)
from .technology import (CPO, LPO, PASSAGE, TechnologyProfile, link_power, optics_area,
                         package_expansion_pct, switch_power_delta)

__version__ = "0.1.0"

__all__ = [
    "CPO",
    "ClusterConfig",
    "CollectiveCost",
    "CommVolumes",
    "ConfigError",
    "DomainMap",
    "Kind",
    "Knobs",
    "LPO",
    "LinkClass",
    "ModelConfig",
    "PASSAGE",
    "ParallelismConfig",
    "PlacementMap",
    "ResultRow",
    "Scenario",
    "StepBreakdown",
    "TechnologyProfile",
    "WorkloadConfig",
    "all_gather",
    "all_reduce",
    "all_to_all",
    "build_placement",
    "comm_volumes",
    "compute_time",
    "dp_sync_time",
    "ep_time",
    "expert_replica_count",
    "flops_per_token_forward",
    "hierarchical_collective",
    "hierarchical_cost",
    "hockney",
    "link_power",
    "load_scenario",
    "optics_area",
    "package_expansion_pct",
    "param_count",
    "pp_bubble_factor",
    "reduce_scatter",
    "reproduce",
    "run",
    "step_time",
    "sweep",
    "switch_power_delta",
    "tp_time",
]
