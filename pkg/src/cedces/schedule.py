"""Resource pools, particle-to-schedule decoding and schedule verification."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from typing import Sequence

from .cloud import (
    MICRO,
    MultiCloudSystem,
    VmTypeSpec,
    comm_time,
    lease_cost,
    lease_cost_micro,
    transfer_cost,
    MEGABITS_PER_GB,
)
from .workflow import TaskGraph, max_parallel_tasks

REL_TOL = 1e-6
ABS_TOL = 1e-9


@dataclass(frozen=True)
class ResourcePool:
    """Leasable instance slots; each VM type replicated ``replicas`` times.

    Slot order is provider-major, type-minor, replica-minor, so slot
    ``t * replicas + r`` is replica ``r`` of global VM type ``t``.
    """

    system: MultiCloudSystem
    replicas: int

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("pool needs at least one replica per type")

    @property
    def size(self) -> int:
        return self.system.n_types * self.replicas

    def __len__(self) -> int:
        return self.size

    def type_index(self, slot: int) -> int:
        return slot // self.replicas

    def vm_type(self, slot: int) -> VmTypeSpec:
        return self.system.vm_types[slot // self.replicas]

    def provider(self, slot: int) -> int:
        return self.vm_type(slot).provider


def build_pool(g: TaskGraph, sys: MultiCloudSystem) -> ResourcePool:
    return ResourcePool(sys, len(max_parallel_tasks(g)))


@dataclass(frozen=True)
class Assignment:
    task: int
    instance: int
    start: float
    finish: float


@dataclass(frozen=True)
class Lease:
    instance: int
    start: float
    finish: float
    cost: Decimal


@dataclass(frozen=True)
class Schedule:
    pool: ResourcePool
    mapping: tuple[Assignment, ...]
    leases: tuple[Lease, ...]
    lease_cost: Decimal
    transfer_cost: float
    tec: float
    tet: float

    @property
    def position(self) -> tuple[int, ...]:
        return tuple(a.instance for a in self.mapping)


def pin_virtual_tasks(x: Sequence[int], g: TaskGraph) -> list[int]:
    """Place the entry and exit on the instance of their first neighbour."""
    x = list(x)
    if g.n >= 2:
        x[g.entry] = x[g.succ[g.entry][0]]
        x[g.exit] = x[g.pred[g.exit][0]]
    return x


class Decoder:
    """Maps position vectors to timed, priced schedules.

    Tasks are processed in index order.  A task starts once all predecessors
    have finished; its processing time includes the transfers to every
    successor placed on another instance; a fresh instance is booted before
    its first task and a reused one serialises after its current lease end.
    """

    def __init__(self, g: TaskGraph, sys: MultiCloudSystem, pool: ResourcePool | None = None):
        self.g = g
        self.sys = sys
        self.pool = pool if pool is not None else build_pool(g, sys)
        if self.pool.system is not sys:
            raise ValueError("pool was built for a different system")
        m = sys.m
        R = self.pool.size
        self._cloud = [self.pool.provider(r) for r in range(R)]
        self._cap = [self.pool.vm_type(r).capacity for r in range(R)]
        self._boot = [self.pool.vm_type(r).boot_time for r in range(R)]
        # seconds per GB for each provider pair, diagonal = internal network
        spg = [[0.0] * m for _ in range(m)]
        for a in range(m):
            for b in range(m):
                bw = sys.providers[a].internal_bandwidth if a == b else sys.external_bandwidth[a][b]
                spg[a][b] = MEGABITS_PER_GB / bw
        self._succ = []
        for i in range(g.n):
            row = []
            for j in g.succ[i]:
                vol = g.edges[(i, j)]
                times = [[vol * spg[a][b] for b in range(m)] for a in range(m)]
                costs = [
                    [float(transfer_cost(vol, a, b, sys)) * MICRO for b in range(m)]
                    for a in range(m)
                ]
                row.append((j, times, costs))
            self._succ.append(tuple(row))
        self._pred = g.pred
        self._weights = g.weights

    @property
    def pool_size(self) -> int:
        return self.pool.size

    def _simulate(self, x: Sequence[int]):
        n = self.g.n
        R = self.pool.size
        if len(x) != n:
            raise ValueError(f"position has length {len(x)}, expected {n}")
        for i, u in enumerate(x):
            if not 0 <= u < R:
                raise ValueError(f"task {i}: instance {u} outside pool of size {R}")
        cloud, cap, boot = self._cloud, self._cap, self._boot
        st_list = [0.0] * n
        ft = [0.0] * n
        lst: dict[int, float] = {}
        lft: dict[int, float] = {}
        transfer_micro = 0.0
        w = self._weights
        for i in range(n):
            u = x[i]
            k = cloud[u]
            st = 0.0
            for p in self._pred[i]:
                if ft[p] > st:
                    st = ft[p]
            transfer = 0.0
            for j, times, costs in self._succ[i]:
                uj = x[j]
                if uj != u:
                    kj = cloud[uj]
                    transfer += times[k][kj]
                    if kj != k:
                        transfer_micro += costs[k][kj]
            pt = w[i] / cap[u] + transfer
            if u in lft:
                if lft[u] > st:
                    st = lft[u]
            else:
                b = boot[u]
                if b > st:
                    st = b
                lst[u] = st - b
            st_list[i] = st
            ft[i] = st + pt
            lft[u] = ft[i]
        return st_list, ft, lst, lft, transfer_micro

    def _lease_micro(self, lst, lft) -> int:
        total = 0
        for u, start in lst.items():
            vm = self.pool.vm_type(u)
            total += lease_cost_micro(lft[u] - start, vm, self.sys.billing_of(vm))
        return total

    def evaluate(self, x: Sequence[int]) -> tuple[float, float]:
        """``(TEC, TET)`` of position ``x`` without building a Schedule."""
        _, ft, lst, lft, transfer_micro = self._simulate(x)
        return (self._lease_micro(lst, lft) + transfer_micro) / MICRO, ft[-1]

    def decode(self, x: Sequence[int]) -> Schedule:
        x = [int(v) for v in x]
        st, ft, lst, lft, transfer_micro = self._simulate(x)
        leases = []
        lease_total = Decimal(0)
        lease_micro = 0
        for u in sorted(lst):
            vm = self.pool.vm_type(u)
            c = lease_cost(lft[u] - lst[u], vm, self.sys.billing_of(vm))
            lease_total += c
            lease_micro += lease_cost_micro(lft[u] - lst[u], vm, self.sys.billing_of(vm))
            leases.append(Lease(u, lst[u], lft[u], c))
        mapping = tuple(Assignment(i, x[i], st[i], ft[i]) for i in range(self.g.n))
        transfer = transfer_micro / MICRO
        return Schedule(
            pool=self.pool,
            mapping=mapping,
            leases=tuple(leases),
            lease_cost=lease_total,
            transfer_cost=transfer,
            tec=(lease_micro + transfer_micro) / MICRO,
            tet=ft[-1],
        )


def decode(x: Sequence[int], g: TaskGraph, sys: MultiCloudSystem, pool: ResourcePool | None = None) -> Schedule:
    return Decoder(g, sys, pool).decode(x)


# --------------------------------------------------------------------------
# independent re-derivation


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.detail}"


@dataclass(frozen=True)
class Recomputed:
    start: tuple[float, ...]
    finish: tuple[float, ...]
    leases: dict[int, tuple[float, float]]
    tec: Decimal
    tet: float


def recompute(x: Sequence[int], g: TaskGraph, sys: MultiCloudSystem, pool: ResourcePool) -> Recomputed:
    """Derive times and cost of a placement straight from the cost equations.

    Each task waits for its predecessors and for the previous task placed on
    the same instance (or for the boot if it is the instance's first task).
    Shares nothing with :class:`Decoder` beyond the pricing primitives.
    """
    n = g.n
    previous_on_instance: list[int | None] = []
    last: dict[int, int] = {}
    for i in range(n):
        previous_on_instance.append(last.get(x[i]))
        last[x[i]] = i

    def processing_time(i: int) -> float:
        vm = pool.vm_type(x[i])
        total = g.tasks[i].weight / vm.capacity
        if i == g.exit:
            return total
        for j in g.succ[i]:
            total += comm_time(
                g.volume(i, j), sys, pool.provider(x[i]), pool.provider(x[j]),
                same_instance=x[i] == x[j],
            )
        return total

    start: dict[int, float] = {}
    finish: dict[int, float] = {}
    for i in range(n):
        ready = max((finish[p] for p in g.pred[i]), default=0.0)
        prev = previous_on_instance[i]
        gate = pool.vm_type(x[i]).boot_time if prev is None else finish[prev]
        start[i] = max(ready, gate)
        finish[i] = start[i] + processing_time(i)

    leases = {}
    cost = Decimal(0)
    for u in sorted(set(x)):
        on_u = [i for i in range(n) if x[i] == u]
        vm = pool.vm_type(u)
        lo = start[on_u[0]] - vm.boot_time
        hi = max(finish[i] for i in on_u)
        leases[u] = (lo, hi)
        cost += lease_cost(hi - lo, vm, sys.billing_of(vm))
    for (i, j), vol in g.edges.items():
        ki, kj = pool.provider(x[i]), pool.provider(x[j])
        if x[i] != x[j] and ki != kj:
            cost += transfer_cost(vol, ki, kj, sys)
    return Recomputed(
        start=tuple(start[i] for i in range(n)),
        finish=tuple(finish[i] for i in range(n)),
        leases=leases,
        tec=cost,
        tet=finish[g.exit],
    )


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=ABS_TOL)


def verify_schedule(s: Schedule, g: TaskGraph, sys: MultiCloudSystem) -> list[Violation]:
    """Check a schedule against an independent recomputation.

    Returns an empty list when the schedule is consistent.
    """
    out: list[Violation] = []
    pool = s.pool
    n = g.n
    if len(s.mapping) != n or [a.task for a in s.mapping] != list(range(n)):
        return [Violation("mapping", "mapping must list every task once, in index order")]
    x = [a.instance for a in s.mapping]
    bad = [i for i, u in enumerate(x) if not 0 <= u < pool.size]
    if bad:
        return [Violation("range", f"tasks {bad} map outside the pool")]

    for a in s.mapping:
        if a.start > a.finish:
            out.append(Violation("interval", f"task {a.task} starts after it finishes"))
    for i, j in g.edges:
        if s.mapping[j].start < s.mapping[i].finish and not _close(s.mapping[j].start, s.mapping[i].finish):
            out.append(Violation("precedence", f"task {j} starts before predecessor {i} finishes"))
    by_instance: dict[int, list[Assignment]] = {}
    for a in s.mapping:
        by_instance.setdefault(a.instance, []).append(a)
    for u, items in by_instance.items():
        for prev, cur in zip(items, items[1:]):
            if cur.start < prev.finish and not _close(cur.start, prev.finish):
                out.append(Violation("overlap", f"tasks {prev.task} and {cur.task} overlap on instance {u}"))

    ref = recompute(x, g, sys, pool)
    for i in range(n):
        if not _close(ref.start[i], s.mapping[i].start) or not _close(ref.finish[i], s.mapping[i].finish):
            out.append(Violation(
                "timing",
                f"task {i}: stored [{s.mapping[i].start}, {s.mapping[i].finish}] "
                f"vs derived [{ref.start[i]}, {ref.finish[i]}]",
            ))

    stored = {l.instance: l for l in s.leases}
    if set(stored) != set(ref.leases):
        out.append(Violation("lease", f"leased instances {sorted(stored)} vs used {sorted(ref.leases)}"))
    for u, (lo, hi) in ref.leases.items():
        l = stored.get(u)
        if l is None:
            continue
        if l.start < 0 or l.start > l.finish:
            out.append(Violation("lease", f"instance {u}: invalid lease [{l.start}, {l.finish}]"))
        if not _close(l.start, lo) or not _close(l.finish, hi):
            out.append(Violation("lease", f"instance {u}: lease [{l.start}, {l.finish}] vs derived [{lo}, {hi}]"))

    if not _close(s.tet, ref.tet):
        out.append(Violation("tet", f"stored TET {s.tet} vs derived {ref.tet}"))
    if not _close(s.tec, float(ref.tec)):
        out.append(Violation("cost", f"stored TEC {s.tec} vs derived {ref.tec}"))
    return out


# --------------------------------------------------------------------------
# text format


def format_schedule(s: Schedule) -> str:
    lines = ["schedule v1", f"pool {s.pool.size} {s.pool.replicas}"]
    for a in s.mapping:
        lines.append(f"task {a.task} {a.instance} {s.pool.vm_type(a.instance).name} {a.start!r} {a.finish!r}")
    for l in s.leases:
        lines.append(f"lease {l.instance} {l.start!r} {l.finish!r} {l.cost}")
    lines.append(f"lease_cost {s.lease_cost}")
    lines.append(f"transfer_cost {s.transfer_cost!r}")
    lines.append(f"tec {s.tec!r}")
    lines.append(f"tet {s.tet!r}")
    return "\n".join(lines) + "\n"


def parse_schedule(text: str, sys: MultiCloudSystem) -> Schedule:
    mapping, leases = [], []
    fields: dict[str, str] = {}
    pool = None
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0].strip() != "schedule v1":
        raise ValueError("not a schedule v1 document")
    for line in lines[1:]:
        parts = line.split()
        tag = parts[0]
        if tag == "pool":
            pool = ResourcePool(sys, int(parts[2]))
            if pool.size != int(parts[1]):
                raise ValueError("pool size does not match the system")
        elif tag == "task":
            mapping.append(Assignment(int(parts[1]), int(parts[2]), float(parts[4]), float(parts[5])))
        elif tag == "lease":
            leases.append(Lease(int(parts[1]), float(parts[2]), float(parts[3]), Decimal(parts[4])))
        else:
            fields[tag] = parts[1]
    if pool is None:
        raise ValueError("missing pool line")
    return Schedule(
        pool=pool,
        mapping=tuple(mapping),
        leases=tuple(leases),
        lease_cost=Decimal(fields["lease_cost"]),
        transfer_cost=float(fields["transfer_cost"]),
        tec=float(fields["tec"]),
        tet=float(fields["tet"]),
    )
