"""Alpha-beta (Hockney) cost models for collective operations.

Every message costs ``alpha + beta * n``: ``alpha`` is the fixed start-up
latency and ``beta`` the per-byte transfer time of the sender's link.
All-gather, reduce-scatter and all-reduce use ring algorithms. All-to-all
assumes a single-layer switched domain where every GPU injects into a
non-blocking switch, so all peers are served in parallel at the sender's
injection bandwidth.

Links are full duplex: send and receive never contend. Reduction arithmetic
is not charged.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from .errors import ConfigError


@dataclass(frozen=True)
class LinkClass:
    """Per-GPU unidirectional bandwidth (bits/s) and start-up latency (s)."""
    per_gpu_bandwidth: float
    latency_alpha: float = 0.0

    def __post_init__(self):
        if not self.per_gpu_bandwidth > 0:
            raise ConfigError("link.per_gpu_bandwidth",
                              f"must be > 0, got {self.per_gpu_bandwidth!r}")
        if not self.latency_alpha >= 0:
            raise ConfigError("link.latency_alpha",
                              f"must be >= 0, got {self.latency_alpha!r}")

    @property
    def beta(self) -> float:
        """Seconds per byte."""
        return 8.0 / self.per_gpu_bandwidth


@dataclass(frozen=True)
class CollectiveCost:
    time: float
    alpha_terms: int
    bytes_on_wire: float

    def __add__(self, other: "CollectiveCost") -> "CollectiveCost":
        return CollectiveCost(self.time + other.time,
                              self.alpha_terms + other.alpha_terms,
                              self.bytes_on_wire + other.bytes_on_wire)

    def scaled(self, k: int) -> "CollectiveCost":
        """Cost of running the same collective ``k`` times back to back."""
        return CollectiveCost(self.time * k, self.alpha_terms * k, self.bytes_on_wire * k)


ZERO = CollectiveCost(0.0, 0, 0.0)


class Kind(str, Enum):
    ALL_GATHER = "all_gather"
    REDUCE_SCATTER = "reduce_scatter"
    ALL_REDUCE = "all_reduce"
    ALL_TO_ALL = "all_to_all"


def hockney(alpha: float, beta: float, n: float) -> float:
    """Time to move one ``n``-byte message."""
    if alpha < 0 or beta < 0 or n < 0:
        raise ValueError(f"hockney inputs must be non-negative, got alpha={alpha}, "
                         f"beta={beta}, n={n}")
    if n == 0:
        # keeps beta=inf from producing nan
        return alpha
    return alpha + beta * n


def _check(p: int, n: float):
    if not isinstance(p, int) or p < 1:
        raise ValueError(f"group size must be an integer >= 1, got {p!r}")
    if n < 0:
        raise ValueError(f"message size must be >= 0, got {n!r}")


def _cost(alpha_terms: int, nbytes: float, link: LinkClass) -> CollectiveCost:
    if nbytes == 0:
        time = alpha_terms * link.latency_alpha
    else:
        time = alpha_terms * link.latency_alpha + nbytes * link.beta
    return CollectiveCost(time, alpha_terms, nbytes)


def _ring(p: int, n_total: float, link: LinkClass) -> CollectiveCost:
    if p == 1:
        return ZERO
    return _cost(p - 1, n_total * (p - 1) / p, link)


def _check_divisible(p: int, n_total: float):
    if n_total % p:
        raise ValueError(f"n_total={n_total} bytes is not divisible by p={p}")


def all_gather(p: int, n_total: float, link: LinkClass) -> CollectiveCost:
    """Ring all-gather; ``n_total`` is the size of the gathered result."""
    _check(p, n_total)
    _check_divisible(p, n_total)
    return _ring(p, n_total, link)


def reduce_scatter(p: int, n_total: float, link: LinkClass) -> CollectiveCost:
    """Ring reduce-scatter; ``n_total`` is the size of each rank's input."""
    _check(p, n_total)
    _check_divisible(p, n_total)
    return _ring(p, n_total, link)


def all_reduce(p: int, n: float, link: LinkClass) -> CollectiveCost:
    """Ring all-reduce, i.e. a reduce-scatter followed by an all-gather.

    Unlike the two halves on their own, ``n`` need not divide evenly by
    ``p``: chunk sizes are treated as real numbers.
    """
    _check(p, n)
    return _ring(p, n, link) + _ring(p, n, link)


def all_to_all(p: int, n_per_gpu: float, link: LinkClass) -> CollectiveCost:
    """All-to-all with uniform destinations on a full-bandwidth switch.

    ``n_per_gpu`` is each rank's whole send buffer, including the ``1/p``
    share addressed to itself that never leaves the GPU.
    """
    _check(p, n_per_gpu)
    if p == 1:
        return ZERO
    return _cost(1, n_per_gpu * (p - 1) / p, link)


_FLAT = {
    Kind.ALL_GATHER: _ring,
    Kind.REDUCE_SCATTER: _ring,
    Kind.ALL_REDUCE: lambda p, n, link: _ring(p, n, link) + _ring(p, n, link),
    Kind.ALL_TO_ALL: lambda p, n, link: ZERO if p == 1 else _cost(1, n * (p - 1) / p, link),
}


def flat_collective(kind: Kind | str, p: int, n: float, link: LinkClass) -> CollectiveCost:
    """Dispatch by kind without the divisibility checks of the public API."""
    _check(p, n)
    return _FLAT[Kind(kind)](p, n, link)


# -- hierarchical domains ---------------------------------------------------

@dataclass(frozen=True)
class DomainMap:
    """Assigns ranks to scale-up domains of ``pod_size`` consecutive ranks."""
    pod_size: int

    def __post_init__(self):
        if not isinstance(self.pod_size, int) or self.pod_size < 1:
            raise ConfigError("pod_size", f"must be a positive integer, got {self.pod_size!r}")

    def domain_of(self, rank: int) -> int:
        return rank // self.pod_size


def domain_counts(group: Iterable[int], domains: DomainMap | Callable[[int], int]) -> list[int]:
    """Number of group members in each domain the group touches."""
    domain_of = domains.domain_of if isinstance(domains, DomainMap) else domains
    counts = Counter(domain_of(r) for r in group)
    return [counts[k] for k in sorted(counts)]


def in_domain_fraction(local_sizes: Sequence[int]) -> float:
    """Share of a sender's peers that sit in its own domain, averaged over senders."""
    p = sum(local_sizes)
    if p <= 1:
        return 1.0
    return sum(c * (c - 1) for c in local_sizes) / (p * (p - 1))


def hierarchical_all_to_all(p: int, n_per_gpu: float, fraction_in_domain: float,
                            scale_up: LinkClass, scale_out: LinkClass) -> CollectiveCost:
    """All-to-all whose peer traffic is split between two disjoint link classes.

    The in-domain and cross-domain shares drain in parallel, each paying one
    start-up latency of its own class, and the slower side sets the time.
    """
    _check(p, n_per_gpu)
    if not 0.0 <= fraction_in_domain <= 1.0:
        raise ValueError(f"in-domain fraction must lie in [0, 1], got {fraction_in_domain}")
    if p == 1:
        return ZERO
    if fraction_in_domain == 1.0:
        return _cost(1, n_per_gpu * (p - 1) / p, scale_up)
    if fraction_in_domain == 0.0:
        return _cost(1, n_per_gpu * (p - 1) / p, scale_out)
    peer_bytes = n_per_gpu * (p - 1) / p
    up = _cost(1, fraction_in_domain * peer_bytes, scale_up)
    out = _cost(1, (1.0 - fraction_in_domain) * peer_bytes, scale_out)
    return CollectiveCost(max(up.time, out.time), 2, up.bytes_on_wire + out.bytes_on_wire)


def hierarchical_cost(kind: Kind | str, n: float, local_sizes: Sequence[int],
                      scale_up: LinkClass, scale_out: LinkClass) -> CollectiveCost:
    """Cost of a collective over a group spread as ``local_sizes`` across domains.

    With a single domain this is exactly the flat collective on the scale-up
    link. Otherwise ring-based collectives run in two levels: the in-domain
    part over the largest local subgroup on the scale-up link, and the
    cross-domain part over one representative per domain on the scale-out
    link, each representative carrying its ``1/local`` shard. All-reduce is
    reduce-scatter in-domain, all-reduce across domains, all-gather in-domain.
    """
    kind = Kind(kind)
    if not local_sizes or any(c < 1 for c in local_sizes):
        raise ValueError("group must be non-empty")
    p = sum(local_sizes)
    _check(p, n)
    if len(local_sizes) == 1:
        return _FLAT[kind](p, n, scale_up)
    if kind is Kind.ALL_TO_ALL:
        return hierarchical_all_to_all(p, n, in_domain_fraction(local_sizes),
                                       scale_up, scale_out)

    domains = len(local_sizes)
    widest = max(local_sizes)
    # the rank that shares its domain with the fewest peers carries the biggest shard
    shard = n / min(local_sizes)
    if kind is Kind.ALL_REDUCE:
        return (_ring(widest, n, scale_up)
                + _ring(domains, shard, scale_out) + _ring(domains, shard, scale_out)
                + _ring(widest, n, scale_up))
    return _ring(widest, n, scale_up) + _ring(domains, shard, scale_out)


def hierarchical_collective(kind: Kind | str, group: Sequence[int], n: float,
                            domains: DomainMap | Callable[[int], int],
                            scale_up: LinkClass, scale_out: LinkClass) -> CollectiveCost:
    """Cost of ``kind`` over the ranks in ``group``, partitioned by ``domains``."""
    if len(group) == 0:
        raise ValueError("group must be non-empty")
    if len(set(group)) != len(group):
        raise ValueError("group lists a rank more than once")
    return hierarchical_cost(kind, n, domain_counts(group, domains), scale_up, scale_out)
