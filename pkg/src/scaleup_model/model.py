"""Parameter, FLOP and communication-volume accounting for MoE transformers.

The model is a stack of identical decoder layers, each holding a dense
attention block, a linear router and a pool of expert FFNs. Embeddings are
not counted. Fine-grained expert segmentation with granularity ``m`` splits
every expert into ``m`` narrower ones and activates ``m`` times as many, so
expert parameters and active-expert FLOPs are independent of ``m``.

All counts are exact Python integers.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

from .errors import ConfigError

if TYPE_CHECKING:
    from .placement import ParallelismConfig


@dataclass(frozen=True)
class ModelConfig:
    layers: int
    d_model: int
    heads: int
    seq_len: int
    total_experts_base: int
    active_experts_base: int
    granularity_m: int = 1
    d_ff_base: int | None = None  # defaults to 4 * d_model
    bytes_per_param: int = 2
    bytes_per_activation: int = 2

    def __post_init__(self):
        if self.d_ff_base is None:
            object.__setattr__(self, "d_ff_base", 4 * self.d_model)
        for name in ("layers", "d_model", "heads", "seq_len", "total_experts_base",
                     "granularity_m", "d_ff_base", "bytes_per_param",
                     "bytes_per_activation"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"model.{name}", f"must be a positive integer, got {value!r}")
        if not isinstance(self.active_experts_base, int) or self.active_experts_base < 0:
            raise ConfigError("model.active_experts_base",
                              f"must be a non-negative integer, got {self.active_experts_base!r}")
        if self.active_experts_base > self.total_experts_base:
            raise ConfigError("model.active_experts_base",
                              "cannot exceed total_experts_base")
        if self.d_model % self.heads:
            raise ConfigError("model.d_model % heads",
                              f"d_model={self.d_model} not divisible by heads={self.heads}")
        if self.d_ff_base % self.granularity_m:
            raise ConfigError("model.d_ff_base % granularity_m",
                              f"d_ff_base={self.d_ff_base} not divisible by "
                              f"granularity_m={self.granularity_m}")

    @property
    def total_experts(self) -> int:
        return self.total_experts_base * self.granularity_m

    @property
    def active_experts(self) -> int:
        return self.active_experts_base * self.granularity_m

    @property
    def d_ff(self) -> int:
        """Hidden size of one (possibly fine-grained) expert."""
        return self.d_ff_base // self.granularity_m

    def with_granularity(self, m: int) -> "ModelConfig":
        return replace(self, granularity_m=m)


@dataclass(frozen=True)
class WorkloadConfig:
    global_batch: int  # sequences per optimizer step
    seq_len: int
    total_tokens: int

    def __post_init__(self):
        for name in ("global_batch", "seq_len"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"workload.{name}", f"must be a positive integer, got {value!r}")
        # a zero-token corpus is allowed: it trains in zero steps
        if not isinstance(self.total_tokens, int) or self.total_tokens < 0:
            raise ConfigError("workload.total_tokens",
                              f"must be a non-negative integer, got {self.total_tokens!r}")

    @property
    def tokens_per_step(self) -> int:
        return self.global_batch * self.seq_len


# -- per-layer pieces, shared by the totals below and by step_time ----------

def attention_params_per_layer(model: ModelConfig) -> int:
    # Q, K, V and output projections
    return 4 * model.d_model ** 2


def router_params_per_layer(model: ModelConfig) -> int:
    return model.d_model * model.total_experts


def expert_params_per_layer(model: ModelConfig) -> int:
    # up and down projection of every expert
    return model.total_experts * 2 * model.d_model * model.d_ff


def param_count(model: ModelConfig) -> int:
    """Total trainable parameters, embeddings excluded."""
    per_layer = (attention_params_per_layer(model)
                 + router_params_per_layer(model)
                 + expert_params_per_layer(model))
    return model.layers * per_layer


@dataclass(frozen=True)
class LayerFlops:
    """Forward FLOPs for one token through one layer, split by block."""
    attention_proj: int
    attention_scores: int
    router: int
    experts: int

    @property
    def total(self) -> int:
        return self.attention_proj + self.attention_scores + self.router + self.experts


def layer_flops_per_token(model: ModelConfig) -> LayerFlops:
    d = model.d_model
    return LayerFlops(
        attention_proj=8 * d * d,
        attention_scores=4 * model.seq_len * d,
        router=2 * d * model.total_experts,
        experts=model.active_experts * 4 * d * model.d_ff,
    )


def flops_per_token_forward(model: ModelConfig) -> int:
    """Forward-pass FLOPs per token for the whole stack.

    A matmul of (a x b) @ (b x c) counts 2abc. The backward pass is taken to
    cost twice the forward pass; callers apply that factor.
    """
    return model.layers * layer_flops_per_token(model).total


# -- communication volumes --------------------------------------------------

@dataclass(frozen=True)
class CommVolumes:
    """Bytes moved per GPU.

    The ``*_bytes`` fields without a ``step`` suffix are per layer per
    microbatch for a single collective; ``tp_collectives`` etc. say how many
    of each run per layer per microbatch (forward plus backward).
    """
    tokens_per_microbatch: int  # tokens seen by one DP rank per microbatch
    tp_allreduce_bytes: int
    tp_collectives: int
    expert_tp_allreduce_bytes: int
    expert_tp_collectives: int
    ep_dispatch_bytes: int
    ep_combine_bytes: int
    ep_collectives: int
    dp_dense_grad_bytes_step: int
    dp_expert_grad_bytes_step: int


def _exact_div(num: int, den: int, what: str) -> int:
    if den <= 0 or num % den:
        raise ConfigError(what, f"{num} is not divisible by {den}")
    return num // den


def tokens_per_microbatch(work: WorkloadConfig, par: "ParallelismConfig") -> int:
    seqs_per_rank = _exact_div(work.global_batch, par.dp, "global_batch % dp")
    seqs_per_mb = _exact_div(seqs_per_rank, par.microbatches_for(work),
                             "sequences_per_dp_rank % microbatches")
    return seqs_per_mb * work.seq_len


def gradient_bytes(model: ModelConfig, par: "ParallelismConfig") -> tuple[int, int]:
    """Per-GPU gradient bytes per step: (attention + router, experts).

    Gradients are kept at parameter precision. A GPU holds its pipeline
    stage's layers, sharded over the TP group.
    """
    layers_per_stage = _exact_div(model.layers, par.pp, "layers % pp")
    dense = layers_per_stage * (attention_params_per_layer(model)
                                + router_params_per_layer(model))
    dense_per_gpu = _exact_div(dense, par.tp, "dense_params_per_stage % tp")
    experts_local = layers_per_stage * par.experts_per_dp_rank * 2 * model.d_model * model.d_ff
    experts_per_gpu = _exact_div(experts_local, par.tp, "expert_params_per_rank % tp")
    return dense_per_gpu * model.bytes_per_param, experts_per_gpu * model.bytes_per_param


def comm_volumes(model: ModelConfig, par: "ParallelismConfig",
                 work: WorkloadConfig) -> CommVolumes:
    """Per-GPU communication volumes for one training step.

    Within a TP group every rank holds the full microbatch of activations,
    so each all-reduce moves ``tokens * d_model`` elements. Tokens for the
    expert all-to-all are de-duplicated across the TP group: each rank
    dispatches ``tokens / tp`` of them, each to ``active_experts`` experts.
    """
    tokens = tokens_per_microbatch(work, par)
    act = model.bytes_per_activation
    d = model.d_model
    tokens_per_gpu = _exact_div(tokens, par.tp, "tokens_per_microbatch % tp")

    tp_bytes = tokens * d * act
    # routed tokens landing on one expert-TP subgroup, uniform routing
    expert_tokens = _exact_div(tokens * model.active_experts, par.experts_per_dp_rank,
                               "tokens * active_experts % experts_per_dp_rank")
    dispatch = tokens_per_gpu * model.active_experts * d * act

    dense_grads, expert_grads = gradient_bytes(model, par)

    return CommVolumes(
        tokens_per_microbatch=tokens,
        tp_allreduce_bytes=tp_bytes,
        tp_collectives=2,  # attention output, forward and backward
        expert_tp_allreduce_bytes=expert_tokens * d * act,
        expert_tp_collectives=2,  # expert combine, forward and backward
        ep_dispatch_bytes=dispatch,
        ep_combine_bytes=dispatch,
        ep_collectives=4,  # dispatch + combine, forward and backward
        dp_dense_grad_bytes_step=dense_grads,
        dp_expert_grad_bytes_step=expert_grads,
    )
