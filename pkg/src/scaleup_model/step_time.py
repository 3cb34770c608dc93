"""Per-step training time from compute, TP, EP, pipeline and DP costs.

Composition, with no compute/communication overlap by default::

    total = (compute + tp_comm + ep_comm) * (1 + bubble_factor) + dp_sync

Each term is the time seen by one GPU for one optimizer step. Everything is
per pipeline stage: a GPU runs ``layers / pp`` layers over every microbatch
of its DP shard.
"""
from __future__ import annotations

from dataclasses import dataclass

from .collectives import (CollectiveCost, Kind, ZERO, flat_collective,
                          hierarchical_all_to_all, hierarchical_cost)
from .errors import ConfigError
from .model import (ModelConfig, WorkloadConfig, comm_volumes, gradient_bytes,
                    tokens_per_microbatch)
from .placement import ClusterConfig, GroupSpan, ParallelismConfig, PlacementMap, build_placement

EP_SPILL_MODES = ("hierarchical", "scale_out_only")


@dataclass(frozen=True)
class Knobs:
    efficiency: float = 1.0  # fraction of peak FLOP rate achieved
    overlap_fraction: float = 0.0  # share of communication hidden under compute
    ep_spill: str = "hierarchical"

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ConfigError("knobs.efficiency", f"must lie in (0, 1], got {self.efficiency!r}")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise ConfigError("knobs.overlap_fraction",
                              f"must lie in [0, 1], got {self.overlap_fraction!r}")
        if self.ep_spill not in EP_SPILL_MODES:
            raise ConfigError("knobs.ep_spill",
                              f"must be one of {', '.join(EP_SPILL_MODES)}, got {self.ep_spill!r}")


@dataclass(frozen=True)
class StepBreakdown:
    compute: float
    tp_comm: float
    ep_comm: float
    pp_bubble: float
    dp_sync: float
    total: float

    FIELDS = ("compute", "tp_comm", "ep_comm", "pp_bubble", "dp_sync", "total")

    def as_dict(self) -> dict[str, float]:
        return {f: getattr(self, f) for f in self.FIELDS}


def _layers_per_stage(model: ModelConfig, par: ParallelismConfig) -> int:
    if model.layers % par.pp:
        raise ConfigError("layers % pp", f"{model.layers} layers do not split into {par.pp} stages")
    return model.layers // par.pp


def _block(flops: float, nbytes: float, rate: float, hbm: float) -> float:
    # roofline: the slower of arithmetic and memory traffic
    return max(flops / rate, nbytes / hbm)


def compute_time(model: ModelConfig, par: ParallelismConfig, cluster: ClusterConfig,
                 work: WorkloadConfig, efficiency: float = 1.0) -> float:
    """Forward plus backward time of all matmul blocks on one GPU.

    Each block is costed as max(FLOPs / achieved rate, bytes / HBM bandwidth)
    for the forward pass; backward is twice the forward.
    """
    tokens = tokens_per_microbatch(work, par)
    mb = par.microbatches_for(work)
    rate = cluster.flops_per_gpu * efficiency
    hbm = cluster.hbm_bandwidth
    d, tp = model.d_model, par.tp
    bp, ba = model.bytes_per_param, model.bytes_per_activation
    t = tokens / tp  # tokens per GPU once work is split across the TP group
    routed = tokens * model.active_experts / par.experts_per_dp_rank  # per expert-TP group
    shard = model.d_ff / par.expert_tp

    blocks = (
        # QKV and output projections, column/row sharded
        (8 * d * d * t, bp * 4 * d * d / tp + ba * (2 * tokens * d + 4 * t * d)),
        # scores and weighted values
        (4 * model.seq_len * d * t, ba * 4 * t * d),
        (2 * d * model.total_experts * t,
         bp * d * model.total_experts + ba * (t * d + t * model.total_experts)),
        (4 * d * model.d_ff * model.active_experts * t,
         bp * par.experts_per_dp_rank * 2 * d * model.d_ff / tp
         + ba * (2 * routed * d + 2 * routed * shard)),
    )
    forward = sum(_block(f, b, rate, hbm) for f, b in blocks)
    return 3 * forward * _layers_per_stage(model, par) * mb


def _worst(kind: Kind, n: float, span: GroupSpan, cluster: ClusterConfig) -> CollectiveCost:
    """Cost of the slowest group of this kind."""
    if n == 0 or span.size == 1:
        return ZERO
    costs = [hierarchical_cost(kind, n, pattern, cluster.scale_up_link, cluster.scale_out_link)
             for pattern in span.patterns]
    return max(costs, key=lambda c: c.time)


def tp_time(model: ModelConfig, par: ParallelismConfig, cluster: ClusterConfig,
            work: WorkloadConfig, placement: PlacementMap | None = None) -> float:
    """Megatron all-reduces: attention over the TP group, experts over expert-TP."""
    placement = placement or build_placement(cluster, par, model)
    vols = comm_volumes(model, par, work)
    per_layer = (
        _worst(Kind.ALL_REDUCE, vols.tp_allreduce_bytes, placement.tp, cluster).time
        * vols.tp_collectives
        + _worst(Kind.ALL_REDUCE, vols.expert_tp_allreduce_bytes, placement.expert_tp,
                 cluster).time * vols.expert_tp_collectives
    )
    return per_layer * _layers_per_stage(model, par) * par.microbatches_for(work)


def ep_all_to_all(n_per_gpu: float, span: GroupSpan, cluster: ClusterConfig,
                  ep_spill: str = "hierarchical") -> CollectiveCost:
    """One dispatch or combine all-to-all over an EP group."""
    p = span.size
    if p == 1 or n_per_gpu == 0:
        return ZERO
    if span.single_domain:
        return flat_collective(Kind.ALL_TO_ALL, p, n_per_gpu, cluster.scale_up_link)
    if ep_spill == "scale_out_only":
        return flat_collective(Kind.ALL_TO_ALL, p, n_per_gpu, cluster.scale_out_link)
    return hierarchical_all_to_all(p, n_per_gpu, span.in_domain_fraction,
                                   cluster.scale_up_link, cluster.scale_out_link)


def ep_time(model: ModelConfig, par: ParallelismConfig, cluster: ClusterConfig,
            work: WorkloadConfig, placement: PlacementMap | None = None,
            ep_spill: str = "hierarchical") -> float:
    """Dispatch and combine all-to-alls, forward and backward, for every layer."""
    placement = placement or build_placement(cluster, par, model)
    vols = comm_volumes(model, par, work)
    # half of the all-to-alls dispatch, half combine
    per_kind = vols.ep_collectives / 2
    per_layer = per_kind * (
        ep_all_to_all(vols.ep_dispatch_bytes, placement.ep, cluster, ep_spill).time
        + ep_all_to_all(vols.ep_combine_bytes, placement.ep, cluster, ep_spill).time)
    return per_layer * _layers_per_stage(model, par) * par.microbatches_for(work)


def pp_bubble_factor(par: ParallelismConfig, work: WorkloadConfig | None = None,
                     microbatches: int | None = None) -> float:
    """Idle share of a 1F1B schedule, as a fraction of its total length."""
    if microbatches is None:
        if work is None and par.microbatches is None:
            raise ValueError("need a workload or an explicit microbatch count")
        microbatches = par.microbatches if work is None else par.microbatches_for(work)
    return (par.pp - 1) / (microbatches + par.pp - 1)


def dp_sync_time(model: ModelConfig, par: ParallelismConfig, cluster: ClusterConfig,
                 placement: PlacementMap | None = None) -> float:
    """Gradient all-reduces once per step.

    Attention and router gradients are reduced over the whole DP group;
    expert gradients only among the copies of the same expert.
    """
    placement = placement or build_placement(cluster, par, model)
    dense, experts = gradient_bytes(model, par)
    return (_worst(Kind.ALL_REDUCE, dense, placement.dp, cluster).time
            + _worst(Kind.ALL_REDUCE, experts, placement.expert_replicas, cluster).time)


def step_time(model: ModelConfig, par: ParallelismConfig, cluster: ClusterConfig,
              work: WorkloadConfig, knobs: Knobs = Knobs(),
              placement: PlacementMap | None = None) -> StepBreakdown:
    placement = placement or build_placement(cluster, par, model)
    exposed = 1.0 - knobs.overlap_fraction
    compute = compute_time(model, par, cluster, work, knobs.efficiency)
    tp = tp_time(model, par, cluster, work, placement) * exposed
    ep = ep_time(model, par, cluster, work, placement, knobs.ep_spill) * exposed
    dp = dp_sync_time(model, par, cluster, placement) * exposed
    busy = compute + tp + ep
    bubble = busy * pp_bubble_factor(par, work)
    return StepBreakdown(compute, tp, ep, bubble, dp, busy + bubble + dp)


def steps_to_train(work: WorkloadConfig) -> int:
    return -(-work.total_tokens // work.tokens_per_step)


def time_to_train(work: WorkloadConfig, step: StepBreakdown) -> float:
    return steps_to_train(work) * step.total
