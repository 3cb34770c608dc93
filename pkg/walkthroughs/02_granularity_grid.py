"""
Fine-grained experts on two scale-up systems
============================================

Sixteen scenarios: Configs 1-4 on a 512-GPU 32 Tb/s pod, the same radix at
14.4 Tb/s, and a 144-GPU 14.4 Tb/s pod.
"""

from scaleup_model import build_placement
from scaleup_model.scenario import load_bundled, run

rows = {}
for system in ("passage", "alt512", "alt144"):
    for c in range(1, 5):
        s = load_bundled("paper_%s_config%d" % (system, c))
        rows[system, c] = run(s)

base = rows["passage", 1].time_to_train
print("%-8s %6s %10s %10s %10s %10s" % ("system", "config", "compute", "tp", "ep", "norm"))
for (system, c), r in rows.items():
    b = r.breakdown
    print("%-8s %6d %10.4f %10.4f %10.4f %10.3f"
          % (system, c, b.compute, b.tp_comm, b.ep_comm, r.time_to_train / base))

# how much EP traffic stays inside a pod
for system in ("passage", "alt144"):
    s = load_bundled("paper_%s_config4" % system)
    p = build_placement(s.cluster, s.parallelism, s.model)
    print(system, "EP group", p.ep.size, "GPUs, in-pod share %.4f" % p.ep_in_domain_fraction)

# days to train 13T tokens at 100% of peak
for system in ("passage", "alt144"):
    print(system, "config 4: %.1f days" % (rows[system, 4].time_to_train / 86400))
