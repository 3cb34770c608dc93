"""Mapping of TP/DP/PP/EP process groups onto scale-up pods.

Ranks are laid out contiguously, TP innermost::

    rank = tp_idx + tp * (dp_idx + dp * pp_idx)

and DP indices are grouped into complete expert sets: the ``set_span``
consecutive DP ranks that together host one copy of every expert. An EP
group is therefore a contiguous block of ``set_span * tp`` ranks, so TP
groups fill pods first and EP groups stay inside a pod whenever one fits.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .collectives import DomainMap, LinkClass
from .errors import ConfigError
from .model import ModelConfig, WorkloadConfig

HBM_BANDWIDTH_DEFAULT = 26e12  # bytes/s, 16 stacks of HBM4


@dataclass(frozen=True)
class ClusterConfig:
    total_gpus: int
    pod_size: int
    scale_up_link: LinkClass
    scale_out_link: LinkClass
    flops_per_gpu: float
    hbm_bandwidth: float = HBM_BANDWIDTH_DEFAULT

    def __post_init__(self):
        for name in ("total_gpus", "pod_size"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"cluster.{name}", f"must be a positive integer, got {value!r}")
        # a trailing partial pod is allowed: 32768 GPUs do not fill 144-GPU pods
        for name in ("flops_per_gpu", "hbm_bandwidth"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"cluster.{name}", f"must be > 0, got {getattr(self, name)!r}")

    @property
    def pods(self) -> int:
        return -(-self.total_gpus // self.pod_size)

    @property
    def domains(self) -> DomainMap:
        return DomainMap(self.pod_size)


@dataclass(frozen=True)
class ParallelismConfig:
    tp: int
    dp: int
    pp: int
    experts_per_dp_rank: int = 1
    microbatches: int | None = None  # defaults to global_batch / dp

    def __post_init__(self):
        for name in ("tp", "dp", "pp", "experts_per_dp_rank"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"parallelism.{name}",
                                  f"must be a positive integer, got {value!r}")
        if self.microbatches is not None and (
                not isinstance(self.microbatches, int) or self.microbatches < 1):
            raise ConfigError("parallelism.microbatches",
                              f"must be a positive integer, got {self.microbatches!r}")
        if self.tp % self.experts_per_dp_rank:
            raise ConfigError("tp % experts_per_dp_rank",
                              f"tp={self.tp} cannot be split into {self.experts_per_dp_rank} "
                              "expert-TP groups")

    @property
    def world_size(self) -> int:
        return self.tp * self.dp * self.pp

    @property
    def expert_tp(self) -> int:
        """Size of the subgroup that shards one expert."""
        return self.tp // self.experts_per_dp_rank

    def microbatches_for(self, work: WorkloadConfig) -> int:
        if self.microbatches is not None:
            return self.microbatches
        if work.global_batch % self.dp:
            raise ConfigError("global_batch % dp",
                              f"global_batch={work.global_batch} not divisible by dp={self.dp}")
        return work.global_batch // self.dp


def validate(cluster: ClusterConfig, par: ParallelismConfig, model: ModelConfig):
    """Raise ConfigError naming the first violated placement constraint."""
    if par.world_size != cluster.total_gpus:
        raise ConfigError("tp*dp*pp == total_gpus",
                          f"{par.tp}*{par.dp}*{par.pp} = {par.world_size}, "
                          f"cluster has {cluster.total_gpus}")
    if model.total_experts % par.experts_per_dp_rank:
        raise ConfigError("total_experts % experts_per_dp_rank",
                          f"{model.total_experts} experts do not split into groups of "
                          f"{par.experts_per_dp_rank}")
    span = model.total_experts // par.experts_per_dp_rank
    if par.dp % span:
        raise ConfigError("dp % expert_set_span",
                          f"dp={par.dp} does not hold whole expert sets of {span} DP ranks")
    if par.tp <= cluster.pod_size:
        if cluster.pod_size % par.tp:
            raise ConfigError("pod_size % tp",
                              f"pods of {cluster.pod_size} cannot hold whole TP groups of {par.tp}")
    elif par.tp % cluster.pod_size:
        raise ConfigError("tp % pod_size",
                          f"TP group of {par.tp} does not cover whole pods of {cluster.pod_size}")


def expert_set_span(par: ParallelismConfig, model: ModelConfig) -> int:
    """DP ranks needed to host one complete set of experts."""
    return model.total_experts // par.experts_per_dp_rank


def expert_replica_count(cluster: ClusterConfig, par: ParallelismConfig,
                         model: ModelConfig) -> int:
    """Copies of each unique expert across the DP dimension."""
    copies, rem = divmod(par.dp * par.experts_per_dp_rank, model.total_experts)
    if rem or copies < 1:
        raise ConfigError("expert_replica_count",
                          f"dp*experts_per_dp_rank = {par.dp * par.experts_per_dp_rank} is not a "
                          f"positive multiple of {model.total_experts} experts")
    return copies


@dataclass(frozen=True)
class GroupSpan:
    """How the groups of one kind are spread over pods.

    ``patterns`` maps each distinct multiset of per-pod member counts
    (sorted, descending) to the number of groups laid out that way.
    """
    kind: str
    size: int
    patterns: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return sum(self.patterns.values())

    @property
    def max_domains(self) -> int:
        return max(len(p) for p in self.patterns)

    @property
    def single_domain(self) -> bool:
        return self.max_domains == 1

    @property
    def in_domain_fraction(self) -> float:
        """Share of peers in the sender's pod, averaged over every sender."""
        if self.size == 1:
            return 1.0
        pairs = sum(n * sum(c * (c - 1) for c in pat) for pat, n in self.patterns.items())
        return pairs / (self.count * self.size * (self.size - 1))


def _span(kind: str, bases, stride: int, size: int, pod: int) -> GroupSpan:
    patterns: Counter = Counter()
    for base in bases:
        if stride == 1:
            counts = []
            start, end = base, base + size
            while start < end:
                stop = min(end, (start // pod + 1) * pod)
                counts.append(stop - start)
                start = stop
        else:
            counts = list(Counter((base + j * stride) // pod for j in range(size)).values())
        patterns[tuple(sorted(counts, reverse=True))] += 1
    return GroupSpan(kind, size, dict(patterns))


@dataclass(frozen=True)
class PlacementMap:
    tp: GroupSpan
    expert_tp: GroupSpan
    ep: GroupSpan
    dp: GroupSpan
    expert_replicas: GroupSpan
    pp: GroupSpan

    @property
    def ep_in_domain_fraction(self) -> float:
        return self.ep.in_domain_fraction

    def spans(self) -> dict[str, GroupSpan]:
        return {g.kind: g for g in (self.tp, self.expert_tp, self.ep, self.dp,
                                     self.expert_replicas, self.pp)}


def rank_coords(rank: int, par: ParallelismConfig) -> tuple[int, int, int]:
    """(tp_idx, dp_idx, pp_idx) of a global rank."""
    tp_idx = rank % par.tp
    dp_idx = (rank // par.tp) % par.dp
    return tp_idx, dp_idx, rank // (par.tp * par.dp)


def build_placement(cluster: ClusterConfig, par: ParallelismConfig,
                    model: ModelConfig) -> PlacementMap:
    validate(cluster, par, model)
    pod = cluster.pod_size
    tp, dp, pp = par.tp, par.dp, par.pp
    span = expert_set_span(par, model)
    replicas = expert_replica_count(cluster, par, model)
    ep_size = span * tp
    total = cluster.total_gpus

    stage_bases = [tp * dp * s for s in range(pp)]
    return PlacementMap(
        tp=_span("tp", range(0, total, tp), 1, tp, pod),
        expert_tp=_span("expert_tp", range(0, total, par.expert_tp), 1, par.expert_tp, pod),
        ep=_span("ep", range(0, total, ep_size), 1, ep_size, pod),
        dp=_span("dp", [b + t for b in stage_bases for t in range(tp)], tp, dp, pod),
        expert_replicas=_span(
            "expert_replicas",
            [b + t + tp * m for b in stage_bases for m in range(span) for t in range(tp)],
            ep_size, replicas, pod),
        pp=_span("pp", range(tp * dp), tp * dp, pp, pod),
    )
