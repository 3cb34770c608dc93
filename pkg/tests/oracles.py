"""Independent reference implementations used only by the tests.

None of these import the package's formulas; they rebuild the quantity from
first principles (matrix shapes, rank tables, expert tables) so an error in
the closed forms cannot cancel against the same error here.
"""
from collections import Counter
from fractions import Fraction

import numpy as np


def layer_matrices(d, d_ff, experts):
    """(rows, cols) of every weight matrix in one decoder layer."""
    shapes = [(d, d)] * 4  # q, k, v, o
    shapes.append((d, experts))  # router
    for _ in range(experts):
        shapes += [(d, d_ff), (d_ff, d)]
    return shapes


def params_by_accumulation(layers, d, d_ff_base, experts_base, m):
    total = 0
    for _ in range(layers):
        for r, c in layer_matrices(d, d_ff_base // m, experts_base * m):
            total += r * c
    return total


def forward_flops_by_matmul(d, seq, d_ff, experts, active):
    """Per token per layer, each (1 x a) @ (a x b) costing 2ab."""
    mm = lambda a, b: 2 * a * b  # noqa: E731
    proj = 4 * mm(d, d)
    scores = mm(d, seq) + mm(seq, d)  # q.K^T then weights.V, per token
    router = mm(d, experts)
    ffn = active * (mm(d, d_ff) + mm(d_ff, d))
    return proj + scores + router + ffn


def rank_table(tp, dp, pp):
    """ranks[pp_idx, dp_idx, tp_idx] under the TP-major contiguous layout."""
    t = np.arange(tp)[None, None, :]
    dd = np.arange(dp)[None, :, None]
    s = np.arange(pp)[:, None, None]
    return t + tp * (dd + dp * s)


def ep_groups(tp, dp, pp, span):
    ranks = rank_table(tp, dp, pp)
    groups = []
    for s in range(pp):
        for b in range(0, dp, span):
            groups.append(ranks[s, b:b + span, :].ravel())
    return groups


def group_patterns(groups, pod):
    patterns = Counter()
    for g in groups:
        counts = np.bincount(np.asarray(g) // pod)
        patterns[tuple(sorted((int(c) for c in counts if c), reverse=True))] += 1
    return dict(patterns)


def mean_in_pod_fraction(groups, pod):
    """Average over every sender of (same-pod peers) / (all peers), exact."""
    num = Fraction(0)
    senders = 0
    for g in groups:
        g = np.asarray(g)
        p = len(g)
        pods = g // pod
        for r in range(p):
            same = int(np.sum(pods == pods[r])) - 1
            num += Fraction(same, p - 1)
            senders += 1
    return num / senders


def expert_table(dp, e, total_experts):
    """expert id hosted in slot j of DP rank i: one row per DP rank."""
    span = total_experts // e
    return [[(i % span) * e + j for j in range(e)] for i in range(dp)]


def replicas_by_counting(dp, e, total_experts):
    counts = Counter(x for row in expert_table(dp, e, total_experts) for x in row)
    assert set(counts) == set(range(total_experts)), "some expert is never hosted"
    copies = set(counts.values())
    assert len(copies) == 1, f"uneven replication {copies}"
    return copies.pop()


def one_f_one_b_bubble(pp, mb):
    """Idle share from a unit-time 1F1B schedule table (fwd and bwd slots).

    Each stage does mb forward and mb backward unit slots; the schedule
    length is 2*(mb + pp - 1) slots, of which 2*mb are busy.
    """
    length = 2 * (mb + pp - 1)
    busy = 2 * mb
    return Fraction(length - busy, length)
