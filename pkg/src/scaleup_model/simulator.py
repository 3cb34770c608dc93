"""Message-level discrete-event simulator for collective algorithms.

This is the brute-force reference for :mod:`scaleup_model.collectives`. It
plays out every message of a schedule on per-rank transmit ports, carrying
real integer payloads so the result of each collective can be checked as
well as its timing.

A port sends one message at a time. A message of ``n`` bytes occupies its
sender's port for ``beta * n`` seconds and arrives ``alpha`` seconds after
it leaves the port. Each rank owns one port per link class; which port a
message uses depends on whether the peer shares the sender's domain.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable

from .collectives import LinkClass


@dataclass
class _Port:
    link: LinkClass
    free_at: float = 0.0


@dataclass
class Network:
    size: int
    scale_up: LinkClass
    scale_out: LinkClass | None = None
    domain_of: Callable[[int], int] = lambda r: 0
    messages: int = 0
    _ports: dict = field(default_factory=dict)

    def port(self, src: int, dst: int) -> _Port:
        local = self.domain_of(src) == self.domain_of(dst)
        if not local and self.scale_out is None:
            raise ValueError(f"ranks {src} and {dst} are in different domains "
                             "but no scale-out link was given")
        key = (src, local)
        if key not in self._ports:
            self._ports[key] = _Port(self.scale_up if local else self.scale_out)
        return self._ports[key]

    def transmit(self, t: float, src: int, dst: int, nbytes: float) -> float:
        """Queue a message at time ``t``; return its arrival time."""
        port = self.port(src, dst)
        start = max(t, port.free_at)
        done = start + nbytes * port.link.beta if nbytes else start
        port.free_at = done
        self.messages += 1
        return done + port.link.latency_alpha


class Simulator:
    """Event loop: callbacks fire in time order, ties broken by insertion."""

    def __init__(self):
        self.now = 0.0
        self._queue: list = []
        self._seq = itertools.count()

    def at(self, t: float, fn: Callable[[], None]):
        heapq.heappush(self._queue, (t, next(self._seq), fn))

    def run(self) -> float:
        while self._queue:
            self.now, _, fn = heapq.heappop(self._queue)
            fn()
        return self.now


@dataclass
class SimResult:
    time: float
    buffers: list
    messages: int


def _add(a, b):
    if isinstance(a, list):
        return [x + y for x, y in zip(a, b)]
    return a + b


def _ring_pass(net: Network, sim: Simulator, ranks: list[int], chunks: list[list],
               chunk_bytes: float, reduce: bool, start: float, done: Callable[[], None]):
    """Run p-1 ring steps over ``ranks``.

    ``chunks[i]`` is rank ``ranks[i]``'s list of p chunk payloads. In a
    reduce pass rank i first sends chunk i-1 and accumulates what it
    receives, ending up owning the full sum of chunk i. In a gather pass
    rank i first sends its own chunk i and then forwards what it receives.
    """
    p = len(ranks)
    if p == 1:
        sim.at(start, done)
        return
    remaining = [p - 1] * p

    def send(i: int, step: int, t: float):
        if reduce:
            idx = (i - step - 1) % p
        else:
            idx = (i - step) % p
        payload = chunks[i][idx]
        j = (i + 1) % p
        arrive = net.transmit(t, ranks[i], ranks[j], chunk_bytes)
        sim.at(arrive, lambda: receive(j, step, idx, payload))

    def receive(j: int, step: int, idx: int, payload):
        if reduce:
            chunks[j][idx] = _add(chunks[j][idx], payload)
        else:
            chunks[j][idx] = payload
        remaining[j] -= 1
        if step + 1 < p - 1:
            send(j, step + 1, sim.now)
        elif not any(remaining):
            done()

    for i in range(p):
        send(i, 0, start)


def simulate_ring(kind: str, p: int, n_total: float, link: LinkClass,
                  data: list[list[int]] | None = None) -> SimResult:
    """Simulate a ring all-gather, reduce-scatter or all-reduce on ``p`` ranks.

    ``data[r]`` holds rank r's p chunk values (defaults to distinct integers).
    For all-gather only chunk r of rank r is meaningful on entry.
    """
    net = Network(p, link)
    sim = Simulator()
    if data is None:
        data = [[100 * r + c for c in range(p)] for r in range(p)]
    chunks = [list(row) for row in data]
    ranks = list(range(p))
    chunk = n_total / p
    finished = {}

    def mark():
        finished["t"] = sim.now

    if kind == "all_gather":
        # rank r starts out owning chunk r
        _ring_pass(net, sim, ranks, chunks, chunk, reduce=False, start=0.0, done=mark)
    elif kind == "reduce_scatter":
        _ring_pass(net, sim, ranks, chunks, chunk, reduce=True, start=0.0, done=mark)
    elif kind == "all_reduce":
        # the reduce pass leaves rank r owning the summed chunk r, which is
        # exactly where the gather pass expects to start
        def gather():
            _ring_pass(net, sim, ranks, chunks, chunk, reduce=False, start=sim.now,
                       done=mark)

        _ring_pass(net, sim, ranks, chunks, chunk, reduce=True, start=0.0, done=gather)
    else:
        raise ValueError(f"unknown ring collective {kind!r}")
    sim.run()
    return SimResult(finished.get("t", 0.0), chunks, net.messages)


def simulate_all_to_all(domain_of_rank: list[int], n_per_gpu: float,
                        scale_up: LinkClass, scale_out: LinkClass | None = None) -> SimResult:
    """Every rank sends ``n_per_gpu / p`` bytes to each peer.

    Messages are queued at t=0; each rank drains its in-domain and
    cross-domain queues on separate ports. ``buffers[r]`` lists the
    (source, payload) pairs rank r received.
    """
    p = len(domain_of_rank)
    net = Network(p, scale_up, scale_out, domain_of=lambda r: domain_of_rank[r])
    sim = Simulator()
    inbox: list[list] = [[] for _ in range(p)]
    per_peer = n_per_gpu / p
    for src in range(p):
        for dst in range(p):
            if dst == src:
                continue
            arrive = net.transmit(0.0, src, dst, per_peer)
            sim.at(arrive, lambda s=src, d=dst: inbox[d].append((s, s * p + d)))
    end = sim.run()
    return SimResult(end, inbox, net.messages)


def simulate_hierarchical_all_reduce(domain_sizes: list[int], n: float,
                                     scale_up: LinkClass, scale_out: LinkClass) -> SimResult:
    """Two-level all-reduce for equal-sized domains.

    Reduce-scatter inside each domain, ring all-reduce of each shard across
    the ranks holding it in every domain, then all-gather inside each domain.
    Phases run back to back; the payload checks the final sums.
    """
    if len(set(domain_sizes)) != 1:
        raise ValueError("the reference only handles equal domain sizes")
    local = domain_sizes[0]
    domains = len(domain_sizes)
    p = local * domains
    ranks_in = [[d * local + i for i in range(local)] for d in range(domains)]
    domain_of = [d for d in range(domains) for _ in range(local)]
    net = Network(p, scale_up, scale_out, domain_of=lambda r: domain_of[r])
    sim = Simulator()
    # rank r's value for shard s, split again into `domains` pieces for the
    # cross-domain ring
    values = [[[1000 * r + 10 * s + k for k in range(domains)] for s in range(local)]
              for r in range(p)]
    shard_bytes = n / local
    state = {"pending": domains, "phase": 0, "t": 0.0}

    def flatten(rank):
        return [sum(v) for v in values[rank]]

    def phase_done():
        state["pending"] -= 1
        if state["pending"]:
            return
        state["phase"] += 1
        state["t"] = sim.now
        if state["phase"] == 1:
            start_cross()
        elif state["phase"] == 2:
            start_gather()

    local_chunks = {}

    def start_reduce():
        for d in range(domains):
            rows = [[list(values[r][s]) for s in range(local)] for r in ranks_in[d]]
            local_chunks[d] = rows
            _ring_pass(net, sim, ranks_in[d], rows, shard_bytes, reduce=True,
                       start=0.0, done=phase_done)

    cross_rows = {}

    def start_cross():
        # position i of every domain now owns the domain-local sum of shard i
        state["pending"] = local
        for i in range(local):
            members = [ranks_in[d][i] for d in range(domains)]
            rows = [list(local_chunks[d][i][i]) for d in range(domains)]
            cross_rows[i] = rows
            piece = shard_bytes / domains

            def after_reduce(rows=rows, members=members, piece=piece):
                _ring_pass(net, sim, members, rows, piece, reduce=False,
                           start=sim.now, done=phase_done)

            _ring_pass(net, sim, members, rows, piece, reduce=True,
                       start=sim.now, done=after_reduce)

    final = {}

    def start_gather():
        state["pending"] = domains
        for d in range(domains):
            rows = [[None] * local for _ in range(local)]
            for i in range(local):
                rows[i][i] = sum(cross_rows[i][d])
            final[d] = rows
            _ring_pass(net, sim, ranks_in[d], rows, shard_bytes, reduce=False,
                       start=state["t"], done=phase_done)

    start_reduce()
    end = sim.run()
    buffers = [final[d][i] for d in range(domains) for i in range(local)]
    expected = [sum(flatten(r)[s] for r in range(p)) for s in range(local)]
    for row in buffers:
        if row != expected:
            raise AssertionError(f"hierarchical all-reduce produced {row}, expected {expected}")
    return SimResult(end, buffers, net.messages)
