from fractions import Fraction

import pytest

from scaleup_model import (ClusterConfig, ConfigError, Knobs, LinkClass, ModelConfig,
                           ParallelismConfig, WorkloadConfig, build_placement, compute_time,
                           dp_sync_time, ep_time, pp_bubble_factor, step_time, tp_time)
from scaleup_model.collectives import all_reduce, all_to_all
from scaleup_model.model import flops_per_token_forward
from scaleup_model.step_time import steps_to_train

from conftest import ref_cluster, ref_model, ref_par, ref_work
from oracles import forward_flops_by_matmul, one_f_one_b_bubble

HUGE_HBM = 1e30
GOLDEN_FWD = 494876869263360  # per-GPU forward FLOPs per step, Config 1 at 512-GPU pods


def toy_model(**kw):
    base = dict(layers=2, d_model=64, heads=4, seq_len=32, total_experts_base=4,
                active_experts_base=1)
    base.update(kw)
    return ModelConfig(**base)


def toy_cluster(total=8, pod=8, hbm=HUGE_HBM):
    return ClusterConfig(total, pod, LinkClass(8e11, 1e-7), LinkClass(8e10, 1e-6), 1e14, hbm)


def test_compute_is_flops_over_rate():
    model, work = toy_model(), WorkloadConfig(8, 32, 10 ** 6)
    par = ParallelismConfig(tp=2, dp=4, pp=1)
    tokens_per_gpu = 8 * 32 // 4 // 2
    flops = 3 * flops_per_token_forward(model) * tokens_per_gpu
    assert compute_time(model, par, toy_cluster(), work) == pytest.approx(flops / 1e14, rel=1e-12)


def test_compute_halves_when_dp_doubles():
    model, work = toy_model(), WorkloadConfig(16, 32, 10 ** 6)
    a = compute_time(model, ParallelismConfig(tp=2, dp=2, pp=1), toy_cluster(4), work)
    b = compute_time(model, ParallelismConfig(tp=2, dp=4, pp=1), toy_cluster(8), work)
    assert b == pytest.approx(a / 2, rel=1e-12)


def test_memory_floor_binds_with_slow_hbm():
    model, work = toy_model(), WorkloadConfig(8, 32, 10 ** 6)
    par = ParallelismConfig(tp=2, dp=4, pp=1)
    fast = compute_time(model, par, toy_cluster(), work)
    slow = compute_time(model, par, toy_cluster(hbm=1e3), work)
    assert slow > fast * 100


def test_config1_forward_flops_golden():
    # frozen from the analytical oracle: per-GPU forward FLOPs per step
    tokens_per_gpu = 4096 // 256 * 8192 // 16
    fwd = flops_per_token_forward(ref_model(1)) // 8 * tokens_per_gpu
    assert fwd == 120 // 8 * (8 * 12288 ** 2 + 4 * 8192 * 12288 + 2 * 12288 * 32
                              + 4 * 12288 * 49152) * 8192
    assert fwd == GOLDEN_FWD
    assert 120 // 8 * forward_flops_by_matmul(12288, 8192, 49152, 32, 1) * tokens_per_gpu \
        == GOLDEN_FWD


def test_tp_time_toy_by_hand():
    model, work = toy_model(layers=1, total_experts_base=2), WorkloadConfig(2, 32, 10 ** 6)
    par = ParallelismConfig(tp=2, dp=1, pp=1, experts_per_dp_rank=2)  # expert_tp = 1
    cl = toy_cluster(total=2)
    n = 1 * 32 * 64 * 2  # one sequence per microbatch, d_model 64, 2-byte activations
    assert tp_time(model, par, cl, work) == pytest.approx(
        2 * all_reduce(2, n, cl.scale_up_link).time * 2, rel=1e-15)


def test_tp_time_zero_for_tp1():
    model, work = toy_model(), WorkloadConfig(8, 32, 10 ** 6)
    assert tp_time(model, ParallelismConfig(tp=1, dp=8, pp=1), toy_cluster(), work) == 0


def test_expert_tp_group_shrinks_with_granularity():
    work = ref_work()
    p1 = build_placement(ref_cluster(), ref_par(1), ref_model(1))
    p8 = build_placement(ref_cluster(), ref_par(8), ref_model(8))
    assert (p1.expert_tp.size, p8.expert_tp.size) == (16, 2)
    assert tp_time(ref_model(8), ref_par(8), ref_cluster(), work) < \
        tp_time(ref_model(1), ref_par(1), ref_cluster(), work)


def test_ep_time_zero_without_active_experts():
    model, work = toy_model(active_experts_base=0), WorkloadConfig(8, 32, 10 ** 6)
    assert ep_time(model, ParallelismConfig(tp=2, dp=4, pp=1), toy_cluster(), work) == 0


def test_ep_in_pod_equals_flat_all_to_all():
    model, work = toy_model(), WorkloadConfig(8, 32, 10 ** 6)
    par = ParallelismConfig(tp=2, dp=4, pp=1)
    cl = toy_cluster()
    n = 32 // 2 * 1 * 64 * 2
    expected = 4 * all_to_all(8, n, cl.scale_up_link).time * 2 * 2
    assert ep_time(model, par, cl, work) == pytest.approx(expected, rel=1e-15)


def test_alt144_ep_slower_than_passage_config4():
    work = ref_work()
    alt = ep_time(ref_model(8), ref_par(8), ref_cluster(144, 14.4e12), work)
    passage = ep_time(ref_model(8), ref_par(8), ref_cluster(), work)
    assert alt / passage > 1


def test_scale_out_only_spill_is_not_faster():
    work = ref_work()
    cl = ref_cluster(144, 14.4e12)
    hier = step_time(ref_model(4), ref_par(4), cl, work)
    flat = step_time(ref_model(4), ref_par(4), cl, work, Knobs(ep_spill="scale_out_only"))
    assert flat.ep_comm >= hier.ep_comm


def test_bubble_factor():
    assert pp_bubble_factor(ParallelismConfig(1, 1, 1), microbatches=16) == 0
    assert Fraction(pp_bubble_factor(ParallelismConfig(1, 1, 8), microbatches=16)) == \
        pytest.approx(float(one_f_one_b_bubble(8, 16)))
    assert pp_bubble_factor(ParallelismConfig(1, 1, 8), microbatches=16) == pytest.approx(7 / 23)
    assert pp_bubble_factor(ParallelismConfig(1, 1, 8), microbatches=10 ** 9) < 1e-8
    assert pp_bubble_factor(ref_par(), ref_work()) == pytest.approx(7 / 23)


def test_dp_sync_zero_for_dp1():
    model = toy_model()
    par = ParallelismConfig(tp=2, dp=4, pp=1)
    assert dp_sync_time(model, par, toy_cluster()) > 0
    par1 = ParallelismConfig(tp=8, dp=1, pp=1, experts_per_dp_rank=4)
    assert dp_sync_time(model, par1, toy_cluster()) == 0


def test_composition():
    step = step_time(ref_model(1), ref_par(1), ref_cluster(), ref_work())
    busy = step.compute + step.tp_comm + step.ep_comm
    assert step.pp_bubble == pytest.approx(busy * 7 / 23, rel=1e-15)
    assert step.total == pytest.approx(busy * (1 + 7 / 23) + step.dp_sync, rel=1e-15)


def test_full_overlap_hides_communication():
    step = step_time(ref_model(1), ref_par(1), ref_cluster(), ref_work(),
                     Knobs(overlap_fraction=1.0))
    assert step.tp_comm == step.ep_comm == step.dp_sync == 0


def test_knob_validation():
    with pytest.raises(ConfigError):
        Knobs(efficiency=0)
    with pytest.raises(ConfigError):
        Knobs(overlap_fraction=1.5)
    with pytest.raises(ConfigError):
        Knobs(ep_spill="ethernet")


def test_steps_ceiling():
    assert steps_to_train(ref_work()) == 387431
    assert 13e12 / (4096 * 8192) == pytest.approx(387430.19, abs=0.01)


def test_efficiency_keeps_alt_slower():
    work = ref_work()
    ratios = []
    for eff in (1.0, 0.4):
        k = Knobs(efficiency=eff)
        a = step_time(ref_model(1), ref_par(1), ref_cluster(144, 14.4e12), work, k)
        p = step_time(ref_model(1), ref_par(1), ref_cluster(), work, k)
        ratios.append(a.total / p.total)
    assert all(r > 1 for r in ratios)


def test_known_pod_size_non_monotone_case():
    # latency-bound DP sync: one flat 32-rank ring pays 62 scale-up alphas, the
    # two-pod split pays 30 scale-up plus 2 scale-out alphas and wins
    model = ModelConfig(layers=4, d_model=256, heads=8, seq_len=512, total_experts_base=8,
                        active_experts_base=1, granularity_m=4, d_ff_base=1024)
    par = ParallelismConfig(tp=8, dp=32, pp=2, experts_per_dp_rank=4)
    work = WorkloadConfig(32, 512, 10 ** 9)

    def run(pod):
        cl = ClusterConfig(512, pod, LinkClass(12.34e12, 250e-9), LinkClass(1.6e12, 2e-6), 1e15)
        return step_time(model, par, cl, work)

    small, big = run(128), run(256)
    assert big.dp_sync > small.dp_sync
    assert big.total > small.total
    assert (big.tp_comm, big.ep_comm) == (small.tp_comm, small.ep_comm)
