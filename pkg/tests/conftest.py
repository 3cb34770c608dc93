import sys

import pytest

from scaleup_model import ClusterConfig, LinkClass, ModelConfig, ParallelismConfig, WorkloadConfig

GRID_M = (1, 2, 4, 8)


def ref_model(m=1):
    return ModelConfig(layers=120, d_model=12288, heads=128, seq_len=8192,
                       total_experts_base=32, active_experts_base=1, granularity_m=m,
                       d_ff_base=49152)


def ref_par(m=1):
    return ParallelismConfig(tp=16, dp=256, pp=8, experts_per_dp_rank=m)


def ref_work():
    return WorkloadConfig(global_batch=4096, seq_len=8192, total_tokens=13 * 10 ** 12)


def ref_cluster(pod=512, bw=32e12, up_alpha=250e-9, out_alpha=2e-6, out_bw=1.6e12):
    return ClusterConfig(32768, pod, LinkClass(bw, up_alpha), LinkClass(out_bw, out_alpha),
                         8.5e15)


@pytest.fixture
def work():
    return ref_work()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.lines():
        terminalreporter.write_line(line)
