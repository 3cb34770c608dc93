"""
Power and area of 32 Tb/s of GPU scale-up optics
================================================
"""

from scaleup_model.technology import (CPO, GPU_PACKAGE_AREA, LPO, PASSAGE, SWITCH_BW,
                                      board_area, component_power, link_power,
                                      optics_area, package_expansion_pct,
                                      switch_power_delta)

bw = 32e12
for p in (LPO, CPO, PASSAGE):
    lp = link_power(bw, p)
    print("%-8s %5.1f pJ/bit  %6.1f W  optics %8.1f sqmm  board %7.0f sqmm  package +%.1f%%"
          % (p.name, p.total_pj_per_bit, lp.total, optics_area(bw, p), board_area(bw, p),
             package_expansion_pct(GPU_PACKAGE_AREA, bw, p)))

print("CPO / Passage power: %.2fx" % (link_power(bw, CPO).total / link_power(bw, PASSAGE).total))

# a 200 Tb/s switch package
print("switch saving CPO -> Passage: %.0f W" % switch_power_delta(SWITCH_BW, CPO, PASSAGE))

# 51.2 Tb/s CPO switch split by component
for name, w in component_power(51.2e12, CPO).items():
    print("  %-6s %6.1f W" % (name, w))

# LPO area comes in 3.2 Tb/s steps
for tb in (3.0, 3.2, 3.3, 6.4, 6.5):
    print("LPO %.1f Tb/s -> %5.0f sqmm" % (tb, optics_area(tb * 1e12, LPO)))
