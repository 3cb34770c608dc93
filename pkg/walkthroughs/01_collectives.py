"""
Collective costs, closed form against message-level simulation
==============================================================

Ring all-reduce, all-to-all, and what changes once a group leaves its pod.
"""

from scaleup_model.collectives import (Kind, LinkClass, all_reduce, all_to_all,
                                       hierarchical_cost, in_domain_fraction)
from scaleup_model.simulator import simulate_all_to_all, simulate_ring

# a 14.4 Tb/s scale-up link and a 1.6 Tb/s scale-out NIC
up = LinkClass(14.4e12, 250e-9)
out = LinkClass(1.6e12, 2e-6)

# ring all-reduce on 8 GPUs, 64 KiB
closed = all_reduce(8, 65536, up)
sim = simulate_ring("all_reduce", 8, 65536, up)
print("all-reduce  closed %.4e s  simulated %.4e s  alpha terms %d"
      % (closed.time, sim.time, closed.alpha_terms))

# the simulator also carries payloads: every rank ends with the same sums
print("sums agree:", all(row == sim.buffers[0] for row in sim.buffers))

# all-to-all inside one pod
print("a2a flat    %.4e s" % all_to_all(8, 65536, up).time)

# same 8 ranks split 4 + 4 over two pods
f = in_domain_fraction([4, 4])
print("in-pod share of peers: %.3f" % f)
print("a2a split   %.4e s" % hierarchical_cost(Kind.ALL_TO_ALL, 65536, [4, 4], up, out).time)
print("simulated   %.4e s" % simulate_all_to_all([0] * 4 + [1] * 4, 65536, up, out).time)

# latency vs bandwidth: where the alpha terms stop mattering
for n in (64, 4096, 1 << 20, 1 << 26):
    c = all_reduce(16, n, up)
    print("n=%9d  time %.3e s  alpha share %.1f%%"
          % (n, c.time, 100 * c.alpha_terms * up.latency_alpha / c.time))
