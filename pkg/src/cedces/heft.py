"""HEFT list scheduling, used only as a makespan yardstick for deadlines."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from itertools import permutations

from .cloud import MEGABITS_PER_GB, MultiCloudSystem
from .workflow import TaskGraph


def _seconds_per_gb(sys: MultiCloudSystem, a: int, b: int) -> float:
    bw = sys.providers[a].internal_bandwidth if a == b else sys.external_bandwidth[a][b]
    return MEGABITS_PER_GB / bw


def mean_seconds_per_gb(sys: MultiCloudSystem) -> float:
    """Average transfer time per GB over ordered pairs of distinct instances."""
    provs = [vm.provider for vm in sys.vm_types]
    pairs = [(a, b) for a, b in permutations(range(len(provs)), 2)]
    if not pairs:
        return 0.0
    return sum(_seconds_per_gb(sys, provs[a], provs[b]) for a, b in pairs) / len(pairs)


def upward_ranks(g: TaskGraph, sys: MultiCloudSystem) -> list[float]:
    caps = [vm.capacity for vm in sys.vm_types]
    spg = mean_seconds_per_gb(sys)
    rank = [0.0] * g.n
    for i in range(g.n - 1, -1, -1):
        mean_exec = sum(g.tasks[i].weight / c for c in caps) / len(caps)
        tail = max((spg * g.edges[(i, j)] + rank[j] for j in g.succ[i]), default=0.0)
        rank[i] = mean_exec + tail
    return rank


@dataclass(frozen=True)
class HeftSchedule:
    instance: tuple[int, ...]
    start: tuple[float, ...]
    finish: tuple[float, ...]
    makespan: float


def heft_schedule(g: TaskGraph, sys: MultiCloudSystem) -> HeftSchedule:
    """Insertion-based HEFT over one instance of every VM type.

    Every instance becomes usable once booted; communication between two
    different instances uses the internal or external bandwidth of their
    providers.
    """
    types = sys.vm_types
    rank = upward_ranks(g, sys)
    order = sorted(range(g.n), key=lambda i: (-rank[i], i))
    busy: list[list[tuple[float, float]]] = [[] for _ in types]
    where = [-1] * g.n
    start = [0.0] * g.n
    finish = [0.0] * g.n
    for i in order:
        best = None
        for r, vm in enumerate(types):
            ready = vm.boot_time
            for p in g.pred[i]:
                arrive = finish[p]
                if where[p] != r:
                    arrive += g.edges[(p, i)] * _seconds_per_gb(sys, types[where[p]].provider, vm.provider)
                ready = max(ready, arrive)
            dur = g.tasks[i].weight / vm.capacity
            st = _earliest_gap(busy[r], ready, dur, vm.boot_time)
            eft = st + dur
            if best is None or eft < best[0]:
                best = (eft, st, r)
        eft, st, r = best
        bisect.insort(busy[r], (st, eft))
        where[i], start[i], finish[i] = r, st, eft
    return HeftSchedule(tuple(where), tuple(start), tuple(finish), max(finish))


def _earliest_gap(slots: list[tuple[float, float]], ready: float, dur: float, available: float) -> float:
    prev_end = available
    for s, e in slots:
        cand = max(ready, prev_end)
        if cand + dur <= s:
            return cand
        prev_end = max(prev_end, e)
    return max(ready, prev_end)


def heft_makespan(g: TaskGraph, sys: MultiCloudSystem) -> float:
    """Makespan of the HEFT schedule, the ``Min(G)`` deadline yardstick."""
    return heft_schedule(g, sys).makespan
