"""Deadline-constrained PSO scheduler with heuristic seeding and GA operators."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .cloud import HYBRID, MEGABITS_PER_GB, MultiCloudSystem
from .schedule import Decoder, ResourcePool, Schedule, build_pool, pin_virtual_tasks
from .workflow import TaskGraph, WorkflowValidationError, random_topological_order

log = logging.getLogger(__name__)

VARIANTS = ("cedces", "random-init-pso", "adpsoga-like")


@dataclass(frozen=True)
class SwarmConfig:
    deadline: float
    num_particles: int = 30
    iterations: int = 200
    c1: float = 2.0
    c2: float = 2.0
    w_max: float = 1.4
    w_min: float = 0.4
    init_deadline_factor: float = 0.9
    seed: int = 0
    variant: str = "cedces"
    # per-coordinate |V| bound as a multiple of the pool size
    velocity_clamp: float = 1.0
    # initial velocities are drawn from +-(fraction * pool size)
    init_velocity_fraction: float = 0.1
    pin_virtual: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.num_particles < 2:
            raise ValueError("need at least two particles")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if not 0 < self.init_deadline_factor <= 1:
            raise ValueError("init_deadline_factor must lie in (0, 1]")
        if not self.w_max >= self.w_min > 0:
            raise ValueError("need w_max >= w_min > 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def paper_scale(cls, deadline: float, **kw) -> "SwarmConfig":
        kw.setdefault("num_particles", 100)
        kw.setdefault("iterations", 1000)
        return cls(deadline=deadline, **kw)


class Fitness(NamedTuple):
    tec: float
    tet: float
    feasible: bool

    @classmethod
    def of(cls, tec: float, tet: float, deadline: float) -> "Fitness":
        return cls(tec, tet, tet <= deadline)


def _rank_key(f: Fitness, deadline: float) -> tuple[int, float]:
    if f.tet <= deadline:
        return (0, f.tec)
    return (1, f.tet)


def is_better(a: Fitness, b: Fitness, deadline: float) -> bool:
    """True when ``a`` is strictly fitter than ``b``."""
    return _rank_key(a, deadline) < _rank_key(b, deadline)


def compare_fitness(a: Fitness, b: Fitness, deadline: float) -> Fitness:
    """Fitter of the two; feasibility first, then cost, then makespan. Ties keep ``a``."""
    return b if is_better(b, a, deadline) else a


def inertia(t: int, cfg: SwarmConfig) -> float:
    if cfg.iterations == 0:
        return cfg.w_max
    return cfg.w_max - t * (cfg.w_max - cfg.w_min) / cfg.iterations


# --------------------------------------------------------------------------
# initialisation


def met_table(g: TaskGraph, sys: MultiCloudSystem) -> np.ndarray:
    """Longest remaining execution time to the exit, per task and VM type.

    ``met[i, t]`` assumes every task on the way runs on VM type ``t`` and
    ignores communication.
    """
    caps = np.array([vm.capacity for vm in sys.vm_types])
    w = np.array(g.weights)
    met = np.zeros((g.n, len(caps)))
    for i in range(g.n - 1, -1, -1):
        tail = np.zeros(len(caps))
        for j in g.succ[i]:
            np.maximum(tail, met[j], out=tail)
        met[i] = w[i] / caps + tail
    return met


class _InitTables:
    """Per-(graph, pool) arrays used by the vectorised VM-initialisation pass."""

    def __init__(self, g: TaskGraph, sys: MultiCloudSystem, pool: ResourcePool):
        self.g = g
        R = pool.size
        slots = range(R)
        types = [pool.vm_type(r) for r in slots]
        self.cloud = np.array([t.provider for t in types])
        self.type_idx = np.array([pool.type_index(r) for r in slots])
        self.cap = np.array([t.capacity for t in types])
        self.boot = np.array([t.boot_time for t in types])
        billing = [sys.billing_of(t) for t in types]
        self.period = np.array([b.period for b in billing], dtype=float)
        self.min_block = np.array([b.minimum_block for b in billing], dtype=float)
        self.hybrid = np.array([b.kind == HYBRID for b in billing])
        self.rate = np.array([t.rate_micro for t in types], dtype=float)
        self.initial = np.array([t.initial_block_micro for t in types], dtype=float)
        m = sys.m
        spg = np.empty((m, m))
        for a in range(m):
            for b in range(m):
                bw = sys.providers[a].internal_bandwidth if a == b else sys.external_bandwidth[a][b]
                spg[a, b] = MEGABITS_PER_GB / bw
        # seconds per GB from a sender on provider k to every slot
        self.spg_to_slot = spg[:, self.cloud]
        self.met = met_table(g, sys)[:, self.type_idx]
        self.weights = np.array(g.weights)

    def lease_micro(self, duration: np.ndarray) -> np.ndarray:
        base = np.where(self.hybrid, (duration - self.min_block) / self.period, duration / self.period)
        periods = np.maximum(np.ceil(base), 0.0)
        return np.where(self.hybrid, self.initial, 0.0) + periods * self.rate


@dataclass
class InitStep:
    task: int
    chosen: int
    costs: np.ndarray
    finish_estimate: np.ndarray
    feasible: np.ndarray


def _heuristic_init(tables: _InitTables, deadline: float, rng: np.random.Generator, trace: list | None = None) -> np.ndarray:
    g = tables.g
    R = len(tables.cap)
    opened = np.zeros(R, dtype=bool)
    lst = np.zeros(R)
    lft = np.zeros(R)
    ft = np.zeros(g.n)
    x = np.full(g.n, -1, dtype=np.int64)
    for i in random_topological_order(g, rng):
        st = np.zeros(R)
        comms = []
        for j in g.pred[i]:
            uj = x[j]
            c = g.edges[(j, i)] * tables.spg_to_slot[tables.cloud[uj]]
            c[uj] = 0.0
            comms.append((j, c))
            np.maximum(st, ft[j] + c, out=st)
        st = np.where(opened, np.maximum(st, lft), np.maximum(st, tables.boot))
        met_i = tables.met[i]
        finish = st + met_i
        feasible = finish <= deadline
        fresh = tables.lease_micro(tables.boot + met_i)
        held = np.where(opened, lft - lst, 0.0)
        extended = tables.lease_micro(np.where(opened, finish - lst, 0.0))
        cost = np.where(opened, extended - tables.lease_micro(held), fresh)
        if feasible.any():
            u = int(np.argmin(np.where(feasible, cost, np.inf)))
        else:
            u = int(np.argmin(finish - deadline))
        if trace is not None:
            trace.append(InitStep(i, u, cost, finish, feasible))

        start = 0.0
        for j, c in comms:
            ft[j] += c[u]
            uj = x[j]
            lft[uj] = max(lft[uj], ft[j])
            start = max(start, ft[j])
        if opened[u]:
            start = max(start, lft[u])
        else:
            start = max(start, tables.boot[u])
            lst[u] = start - tables.boot[u]
            opened[u] = True
        ft[i] = start + tables.weights[i] / tables.cap[u]
        lft[u] = ft[i]
        x[i] = u
    return x


def heuristic_init(
    g: TaskGraph,
    sys: MultiCloudSystem,
    cfg: SwarmConfig,
    rng: np.random.Generator,
    pool: ResourcePool | None = None,
    trace: list | None = None,
) -> np.ndarray:
    """Deadline-aware greedy placement used to seed the swarm.

    Tasks are visited in a random topological order; each goes to the
    cheapest instance expected to finish the remaining path within
    ``init_deadline_factor * deadline``, or to the least-late instance when
    none qualifies.  Reused instances are charged the lease extension only.
    """
    pool = pool if pool is not None else build_pool(g, sys)
    tables = _InitTables(g, sys, pool)
    return _heuristic_init(tables, cfg.init_deadline_factor * cfg.deadline, rng, trace)


# --------------------------------------------------------------------------
# particle dynamics


def _round(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def shr_repair(x_new: Sequence[float], x_old: Sequence[float], lo: float, hi: float) -> np.ndarray:
    """Shrink an out-of-bounds move back along its direction onto the box.

    All coordinates share one scale factor, the largest that keeps every
    coordinate inside ``[lo, hi]``.
    """
    x_new = np.asarray(x_new, dtype=float)
    x_old = np.asarray(x_old, dtype=float)
    if np.all((x_new >= lo) & (x_new <= hi)):
        return x_new.copy()
    d = x_new - x_old
    alpha = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(x_new > hi, (hi - x_old) / d, 1.0)
        down = np.where(x_new < lo, (lo - x_old) / d, 1.0)
    alpha = float(min(alpha, up.min(), down.min()))
    alpha = max(alpha, 0.0)
    repaired = _round(x_old + alpha * d)
    return np.clip(repaired, lo, hi)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: Fitness | None = None
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)


def update_particle(
    p: Particle,
    gbest: np.ndarray,
    t: int,
    cfg: SwarmConfig,
    rng: np.random.Generator,
    pool_size: int,
) -> Particle:
    """One velocity/position step followed by rounding and SHR repair."""
    w = inertia(t, cfg)
    r1, r2 = rng.random(2)
    x = p.position.astype(float)
    v = (
        w * p.velocity
        + cfg.c1 * r1 * (p.best_position - x)
        + cfg.c2 * r2 * (np.asarray(gbest, dtype=float) - x)
    )
    vmax = cfg.velocity_clamp * pool_size
    v = np.clip(v, -vmax, vmax)
    x_new = _round(x + v)
    x_new = shr_repair(x_new, x, 0, pool_size - 1)
    return Particle(x_new.astype(np.int64), v, p.best_position, p.best_fitness, p.rng)


# --------------------------------------------------------------------------
# genetic operators


def tournament_select(fitnesses: Sequence[Fitness], deadline: float, rng: np.random.Generator) -> tuple[int, int]:
    """Indices of two distinct winners of binary tournaments on personal bests."""
    n = len(fitnesses)
    if n < 2:
        raise ValueError("tournament needs at least two particles")

    def duel(candidates: list[int]) -> int:
        if len(candidates) == 1:
            return candidates[0]
        a, b = rng.choice(candidates, size=2, replace=False)
        return int(b) if is_better(fitnesses[b], fitnesses[a], deadline) else int(a)

    everyone = list(range(n))
    first = duel(everyone)
    second = duel([i for i in everyone if i != first])
    return first, second


def single_point_crossover(a: Sequence[int], b: Sequence[int], rng: np.random.Generator, k: int | None = None) -> np.ndarray:
    """Child takes ``a[:k]`` and ``b[k:]`` with ``k`` drawn from ``1..n``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("parents differ in length")
    n = len(a)
    if k is None:
        k = int(rng.integers(1, n + 1))
    return np.concatenate([a[:k], b[k:]])


def two_point_crossover(a: Sequence[int], b: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    i, j = sorted(int(v) for v in rng.integers(0, n + 1, size=2))
    child = a.copy()
    child[i:j] = b[i:j]
    return child


def mutate(x: Sequence[int], pool_size: int, rng: np.random.Generator) -> np.ndarray:
    x = np.array(x, copy=True)
    k = int(rng.integers(len(x)))
    x[k] = int(rng.integers(pool_size))
    return x


# --------------------------------------------------------------------------
# main loop


@dataclass
class RunResult:
    schedule: Schedule
    fitness: Fitness
    position: np.ndarray
    history: list[Fitness]
    config: SwarmConfig
    evaluations: int


_worker_decoder: Decoder | None = None


def _worker_setup(g, sys, replicas):
    global _worker_decoder
    _worker_decoder = Decoder(g, sys, ResourcePool(sys, replicas))


def _worker_eval(positions):
    return [_worker_decoder.evaluate(x) for x in positions]


class _Evaluator:
    def __init__(self, decoder: Decoder, workers: int):
        self.decoder = decoder
        self.workers = workers
        self.count = 0
        self._ex = None
        if workers > 1:
            self._ex = ProcessPoolExecutor(
                max_workers=workers,
                initializer=_worker_setup,
                initargs=(decoder.g, decoder.sys, decoder.pool.replicas),
            )

    def __call__(self, positions: list[list[int]]) -> list[tuple[float, float]]:
        self.count += len(positions)
        if self._ex is None:
            return [self.decoder.evaluate(x) for x in positions]
        chunk = math.ceil(len(positions) / self.workers)
        parts = [positions[i:i + chunk] for i in range(0, len(positions), chunk)]
        out = []
        for res in self._ex.map(_worker_eval, parts):
            out.extend(res)
        return out

    def close(self):
        if self._ex is not None:
            self._ex.shutdown()


def run(
    g: TaskGraph,
    sys: MultiCloudSystem,
    cfg: SwarmConfig,
    pool: ResourcePool | None = None,
) -> RunResult:
    """Optimise a placement of ``g`` on ``sys`` under ``cfg.deadline``."""
    if g.n == 0:
        raise WorkflowValidationError("empty workflow")
    pool = pool if pool is not None else build_pool(g, sys)
    decoder = Decoder(g, sys, pool)
    R = pool.size
    D = cfg.deadline
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.num_particles + 1)
    swarm_rng = np.random.default_rng(streams[0])
    rngs = [np.random.default_rng(s) for s in streams[1:]]

    def prepare(x):
        x = [int(v) for v in x]
        return pin_virtual_tasks(x, g) if cfg.pin_virtual else x

    tables = _InitTables(g, sys, pool) if cfg.variant == "cedces" else None
    particles: list[Particle] = []
    for rng in rngs:
        if tables is not None:
            x = _heuristic_init(tables, cfg.init_deadline_factor * D, rng)
        else:
            x = rng.integers(0, R, size=g.n)
        half = cfg.init_velocity_fraction * R
        v = rng.uniform(-half, half, size=g.n)
        x = np.array(prepare(x), dtype=np.int64)
        particles.append(Particle(x, v, x.copy(), None, rng))

    evaluate = _Evaluator(decoder, cfg.workers)
    try:
        results = evaluate([p.position.tolist() for p in particles])
        gbest_x = None
        gbest_f = None
        for p, (tec, tet) in zip(particles, results):
            p.best_fitness = Fitness.of(tec, tet, D)
            if gbest_f is None or is_better(p.best_fitness, gbest_f, D):
                gbest_x, gbest_f = p.position.copy(), p.best_fitness
        history = [gbest_f]

        for t in range(cfg.iterations):
            for idx, p in enumerate(particles):
                q = update_particle(p, gbest_x, t, cfg, p.rng, R)
                q.position = np.array(prepare(q.position), dtype=np.int64)
                particles[idx] = q
            results = evaluate([p.position.tolist() for p in particles])
            for p, (tec, tet) in zip(particles, results):
                f = Fitness.of(tec, tet, D)
                if is_better(f, p.best_fitness, D):
                    p.best_position, p.best_fitness = p.position.copy(), f
                if is_better(f, gbest_f, D):
                    gbest_x, gbest_f = p.position.copy(), f

            bests = [p.best_fitness for p in particles]
            i, j = tournament_select(bests, D, swarm_rng)
            if cfg.variant == "adpsoga-like":
                child = two_point_crossover(particles[i].position, particles[j].position, swarm_rng)
            else:
                child = single_point_crossover(particles[i].position, particles[j].position, swarm_rng)
            child = np.array(prepare(child), dtype=np.int64)
            worst = 0
            for k in range(1, len(particles)):
                if is_better(bests[worst], bests[k], D):
                    worst = k
            (tec, tet), = evaluate([child.tolist()])
            f = Fitness.of(tec, tet, D)
            target = particles[worst]
            target.position = child
            target.best_position, target.best_fitness = child.copy(), f
            if is_better(f, gbest_f, D):
                gbest_x, gbest_f = child.copy(), f

            k = int(swarm_rng.integers(len(particles)))
            mutated = mutate(particles[k].position, R, swarm_rng)
            particles[k].position = np.array(prepare(mutated), dtype=np.int64)
            history.append(gbest_f)
            if log.isEnabledFor(logging.DEBUG):
                log.debug("iter %d gbest tec=%.6f tet=%.3f", t + 1, gbest_f.tec, gbest_f.tet)
    finally:
        evaluate.close()

    schedule = decoder.decode(gbest_x.tolist())
    return RunResult(
        schedule=schedule,
        fitness=gbest_f,
        position=gbest_x,
        history=history,
        config=cfg,
        evaluations=evaluate.count,
    )


def format_run_report(result: RunResult, schedule_file: str | None = None) -> str:
    cfg = result.config
    lines = [
        "run v1",
        f"seed {cfg.seed}",
        f"variant {cfg.variant}",
        f"deadline {cfg.deadline!r}",
        f"particles {cfg.num_particles}",
        f"iterations {cfg.iterations}",
    ]
    for t, f in enumerate(result.history):
        lines.append(f"iter {t} {f.tec!r} {f.tet!r} {int(f.feasible)}")
    lines.append(f"final {result.fitness.tec!r} {result.fitness.tet!r} {int(result.fitness.feasible)}")
    if schedule_file is not None:
        lines.append(f"schedule {schedule_file}")
    return "\n".join(lines) + "\n"
