"""Power and area budgets for optical scale-up interconnect technologies.

A :class:`TechnologyProfile` is plain data: the energy per bit burned on the
host package (SerDes, optical engine) and off it (pluggable module, external
laser), plus how much area a given bandwidth costs. Pluggable modules come
in fixed bandwidth quanta, each occupying a fixed board footprint; on-package
optics are sized by an areal bandwidth density.

Units: bits/s, pJ/bit, W, sqmm. Densities are Gb/s per sqmm.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

# pJ/bit sums are rounded to this many decimals so 3.2 + 1.1 is 4.3
_PJ_DIGITS = 9


@dataclass(frozen=True)
class TechnologyProfile:
    name: str
    in_package_pj_per_bit: float
    off_package_pj_per_bit: float
    areal_density: float  # Gb/s per sqmm, beachfront included where it applies
    module_quantum_bw: float | None = None  # bits/s per pluggable module
    module_area: float | None = None  # sqmm per pluggable module
    on_package: bool = True
    # optional split of the two totals, e.g. {"serdes": 5.0, "pic": 4.7}
    in_package_parts: dict = field(default_factory=dict)
    off_package_parts: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if not self.name:
            raise ConfigError("technology.name", "must be non-empty")
        for attr in ("in_package_pj_per_bit", "off_package_pj_per_bit"):
            if getattr(self, attr) < 0:
                raise ConfigError(f"technology.{attr}", f"must be >= 0 for {self.name}")
        if not self.areal_density > 0:
            raise ConfigError("technology.areal_density", f"must be > 0 for {self.name}")
        if (self.module_quantum_bw is None) != (self.module_area is None):
            raise ConfigError("technology.module",
                              f"{self.name}: module_quantum_bw and module_area go together")
        for attr, total in (("in_package_parts", self.in_package_pj_per_bit),
                            ("off_package_parts", self.off_package_pj_per_bit)):
            parts = getattr(self, attr)
            if parts and round(sum(parts.values()), _PJ_DIGITS) != round(total, _PJ_DIGITS):
                raise ConfigError(f"technology.{attr}",
                                  f"{self.name}: parts sum to {sum(parts.values())}, "
                                  f"expected {total}")

    @property
    def total_pj_per_bit(self) -> float:
        return round(self.in_package_pj_per_bit + self.off_package_pj_per_bit, _PJ_DIGITS)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TechnologyProfile":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("technology keys", f"unknown keys: {', '.join(sorted(unknown))}")
        return cls(**data)


LPO = TechnologyProfile(
    name="lpo",
    in_package_pj_per_bit=5.0,
    off_package_pj_per_bit=8.0,
    areal_density=1.3,
    module_quantum_bw=3.2e12,
    module_area=2389.0,  # OSFP-XD, 105.8 mm x 22.58 mm
    on_package=False,
    in_package_parts={"serdes": 5.0},
    off_package_parts={"module": 8.0},
    description="1.6T DR8 linear pluggable optics, 224G/lane, host SerDes with DSP",
)

CPO = TechnologyProfile(
    name="cpo",
    in_package_pj_per_bit=9.7,
    off_package_pj_per_bit=2.3,
    areal_density=24.4,
    in_package_parts={"serdes": 5.0, "pic": 4.7},
    off_package_parts={"laser": 2.3},
    description="224G 2.5D optical engines with 2D host integration; "
                "the 224G split reuses the 112G optical engine figures",
)

PASSAGE = TechnologyProfile(
    name="passage",
    in_package_pj_per_bit=3.2,
    off_package_pj_per_bit=1.1,
    areal_density=160.0,
    in_package_parts={"serdes": 2.0, "pic": 1.2},
    off_package_parts={"laser": 1.1},
    description="56G x 8 lambda 3D optical interposer, short-reach SerDes",
)

PROFILES: dict[str, TechnologyProfile] = {p.name: p for p in (LPO, CPO, PASSAGE)}

# four-reticle GPU: 4 logic dies of 26 x 33 mm and 16 HBM stacks of 13 x 11 mm
RETICLE_AREA = 26.0 * 33.0
HBM_STACK_AREA = 13.0 * 11.0
GPU_PACKAGE_AREA = 4 * RETICLE_AREA + 16 * HBM_STACK_AREA
GPU_SCALEUP_BW = 32e12
SWITCH_BW = 200e12


def _check_bw(bandwidth: float):
    if bandwidth < 0:
        raise ValueError(f"bandwidth must be >= 0, got {bandwidth}")


@dataclass(frozen=True)
class LinkPower:
    in_package: float
    off_package: float

    @property
    def total(self) -> float:
        return self.in_package + self.off_package


def link_power(bandwidth: float, tech: TechnologyProfile) -> LinkPower:
    """Watts spent moving ``bandwidth`` bits/s with ``tech``."""
    _check_bw(bandwidth)
    return LinkPower(bandwidth * tech.in_package_pj_per_bit * 1e-12,
                     bandwidth * tech.off_package_pj_per_bit * 1e-12)


def component_power(bandwidth: float, tech: TechnologyProfile) -> dict[str, float]:
    """Watts per named energy component (SerDes, PIC, laser, module)."""
    _check_bw(bandwidth)
    parts = {**tech.in_package_parts, **tech.off_package_parts}
    return {name: bandwidth * pj * 1e-12 for name, pj in parts.items()}


def modules_needed(bandwidth: float, tech: TechnologyProfile) -> int:
    if tech.module_quantum_bw is None:
        raise ValueError(f"{tech.name} is not a pluggable-module technology")
    _check_bw(bandwidth)
    return math.ceil(bandwidth / tech.module_quantum_bw)


def optics_area(bandwidth: float, tech: TechnologyProfile) -> float:
    """Area in sqmm taken by the optics for ``bandwidth`` bits/s."""
    _check_bw(bandwidth)
    if tech.module_quantum_bw is not None:
        return modules_needed(bandwidth, tech) * tech.module_area
    return bandwidth / 1e9 / tech.areal_density


def package_expansion_pct(base_package: float, bandwidth: float,
                          tech: TechnologyProfile) -> float:
    """Package growth caused by on-package optics, as a percentage.

    Pluggable optics live on the board and leave the package unchanged.
    """
    if not base_package > 0:
        raise ValueError(f"base package area must be > 0, got {base_package}")
    if not tech.on_package:
        return 0.0
    return 100.0 * optics_area(bandwidth, tech) / base_package


def board_area(bandwidth: float, tech: TechnologyProfile) -> float:
    """Board area taken by pluggable modules; zero for on-package optics."""
    return 0.0 if tech.on_package else optics_area(bandwidth, tech)


def switch_power_delta(switch_bandwidth: float, a: TechnologyProfile,
                       b: TechnologyProfile) -> float:
    """Watts saved per switch by using ``b`` instead of ``a``."""
    _check_bw(switch_bandwidth)
    return switch_bandwidth * (a.total_pj_per_bit - b.total_pj_per_bit) * 1e-12
