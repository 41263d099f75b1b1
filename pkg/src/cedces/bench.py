"""Experiment harness: deadline sweeps, repeated seeds, CSV tables."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Sequence

import numpy as np

from .cloud import MultiCloudSystem, default_testbed, load_system
from .heft import heft_makespan
from .optimizer import Fitness, SwarmConfig, is_better, run
from .schedule import format_schedule
from .workflow import TaskGraph, layered_dag, load_workflow

PAPER_BETAS = (1.0, 1.5, 2.0, 5.0, 8.0, 15.0)

VARIANT_ALIASES = {"pso": "random-init-pso", "adpsoga": "adpsoga-like"}


def canonical_variant(name: str) -> str:
    return VARIANT_ALIASES.get(name, name)


@dataclass(frozen=True)
class ExperimentConfig:
    workflows: Sequence[str]
    betas: Sequence[float] = PAPER_BETAS
    repetitions: int = 10
    variants: Sequence[str] = ("cedces", "random-init-pso")
    base_seed: int = 0
    num_particles: int = 30
    iterations: int = 200
    system: str | None = None
    out_dir: str | None = None
    workers: int = 1
    pin_virtual: bool = False

    def __post_init__(self):
        if not self.workflows:
            raise ValueError("no workflows given")
        if any(b <= 0 for b in self.betas):
            raise ValueError("beta values must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        object.__setattr__(self, "variants", tuple(canonical_variant(v) for v in self.variants))


@dataclass(frozen=True)
class ResultRow:
    workflow: str
    n: int
    variant: str
    beta: float
    seed: int
    tec: float
    tet: float
    deadline: float
    feasible: bool
    overshoot: float
    wall_clock: float = field(default=0.0, compare=False)


def overshoot_pct(tet: float, deadline: float) -> float:
    return max(0.0, (tet - deadline) / deadline) * 100.0


def resolve_workflow(spec: str) -> TaskGraph:
    """Load a workflow file, or build ``layered:<n>[:<seed>]`` on the fly."""
    if spec.startswith("layered:"):
        parts = spec.split(":")
        n = int(parts[1])
        seed = int(parts[2]) if len(parts) > 2 else 0
        return layered_dag(n, np.random.default_rng(seed))
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"workflow not found: {spec}")
    return load_workflow(path)


def resolve_system(path: str | None) -> MultiCloudSystem:
    return default_testbed() if path is None else load_system(path)


def _workflow_name(spec: str) -> str:
    return spec if spec.startswith("layered:") else Path(spec).stem


def _run_cell(args):
    spec, variant, beta, seed, cfg = args
    g = resolve_workflow(spec)
    sys = resolve_system(cfg.system)
    deadline = beta * heft_makespan(g, sys)
    swarm = SwarmConfig(
        deadline=deadline,
        num_particles=cfg.num_particles,
        iterations=cfg.iterations,
        seed=seed,
        variant=variant,
        pin_virtual=cfg.pin_virtual,
    )
    t0 = time.perf_counter()
    result = run(g, sys, swarm)
    elapsed = time.perf_counter() - t0
    f = result.fitness
    row = ResultRow(
        workflow=_workflow_name(spec),
        n=g.n,
        variant=variant,
        beta=float(beta),
        seed=seed,
        tec=f.tec,
        tet=f.tet,
        deadline=deadline,
        feasible=f.feasible,
        overshoot=overshoot_pct(f.tet, deadline),
        wall_clock=elapsed,
    )
    return row, format_schedule(result.schedule)


def _row_key(r: ResultRow):
    return (r.workflow, r.variant, r.beta, r.seed)


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Run every (workflow, variant, beta, repetition) cell.

    Repetition ``r`` uses seed ``base_seed + r`` for every variant and beta.
    Writes ``runs.csv``, ``summary.csv``, ``timings.csv`` and the best
    schedule per cell to ``cfg.out_dir`` when set.
    """
    for spec in cfg.workflows:
        if not spec.startswith("layered:") and not Path(spec).exists():
            raise FileNotFoundError(f"workflow not found: {spec}")
    jobs = [
        (spec, variant, beta, cfg.base_seed + rep, cfg)
        for spec in cfg.workflows
        for variant in cfg.variants
        for beta in cfg.betas
        for rep in range(cfg.repetitions)
    ]
    # fail fast on bad variants before spending time on runs
    for v in cfg.variants:
        SwarmConfig(deadline=1.0, variant=v)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            outputs = list(ex.map(_run_cell, jobs))
    else:
        outputs = [_run_cell(j) for j in jobs]
    outputs.sort(key=lambda o: _row_key(o[0]))
    rows = [o[0] for o in outputs]

    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "runs.csv").write_text(runs_csv(rows))
        (out / "summary.csv").write_text(summary_csv(summarize(rows)))
        (out / "timings.csv").write_text(timings_csv(rows))
        sched_dir = out / "schedules"
        sched_dir.mkdir(exist_ok=True)
        best: dict[tuple, tuple[ResultRow, str]] = {}
        for row, text in outputs:
            key = (row.workflow, row.variant, row.beta)
            f = Fitness.of(row.tec, row.tet, row.deadline)
            if key not in best:
                best[key] = (row, text)
                continue
            inc = best[key][0]
            if is_better(f, Fitness.of(inc.tec, inc.tet, inc.deadline), row.deadline):
                best[key] = (row, text)
        for (wf, variant, beta), (_, text) in sorted(best.items()):
            (sched_dir / f"{wf.replace(':', '_')}_{variant}_beta{beta:g}.txt").write_text(text)
    return rows


# --------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class CellSummary:
    workflow: str
    n: int
    variant: str
    beta: float
    runs: int
    mean_tec: float
    mean_tet: float
    deadline: float
    feasible_runs: int
    mean_overshoot: float


@dataclass(frozen=True)
class Improvement:
    workflow: str
    beta: float
    variant: str
    baseline: str
    cost_improvement: float | None


@dataclass
class Summary:
    cells: list[CellSummary]
    improvements: list[Improvement]

    def cell(self, workflow: str, variant: str, beta: float) -> CellSummary:
        for c in self.cells:
            if (c.workflow, c.variant, c.beta) == (workflow, variant, beta):
                return c
        raise KeyError((workflow, variant, beta))


def relative_improvement(tec_a: float, tec_b: float) -> float | None:
    """Percent by which ``tec_a`` undercuts ``tec_b``; ``None`` when ``tec_b`` is 0."""
    if tec_b == 0:
        return None
    return (tec_b - tec_a) / tec_b * 100.0


def summarize(rows: Sequence[ResultRow]) -> Summary:
    if not rows:
        raise ValueError("no result rows")
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.workflow, r.beta, r.variant), []).append(r)
    cells = []
    for (wf, beta, variant), rs in sorted(groups.items()):
        late = [r.overshoot for r in rs if not r.feasible]
        cells.append(CellSummary(
            workflow=wf,
            n=rs[0].n,
            variant=variant,
            beta=beta,
            runs=len(rs),
            mean_tec=fmean(r.tec for r in rs),
            mean_tet=fmean(r.tet for r in rs),
            deadline=rs[0].deadline,
            feasible_runs=sum(r.feasible for r in rs),
            mean_overshoot=fmean(late) if late else 0.0,
        ))
    improvements = []
    by_wb: dict[tuple, list[CellSummary]] = {}
    for c in cells:
        by_wb.setdefault((c.workflow, c.beta), []).append(c)
    for (wf, beta), cs in sorted(by_wb.items()):
        for a in cs:
            for b in cs:
                if a.variant != b.variant:
                    improvements.append(
                        Improvement(wf, beta, a.variant, b.variant, relative_improvement(a.mean_tec, b.mean_tec))
                    )
    return Summary(cells, improvements)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


RUN_COLUMNS = ["workflow", "n", "variant", "beta", "seed", "tec", "tet", "deadline", "feasible", "overshoot_pct"]


def runs_csv(rows: Sequence[ResultRow]) -> str:
    return _csv(
        RUN_COLUMNS,
        [[r.workflow, r.n, r.variant, r.beta, r.seed, r.tec, r.tet, r.deadline, r.feasible, r.overshoot] for r in rows],
    )


def timings_csv(rows: Sequence[ResultRow]) -> str:
    return _csv(
        ["workflow", "variant", "beta", "seed", "wall_clock_s"],
        [[r.workflow, r.variant, r.beta, r.seed, r.wall_clock] for r in rows],
    )


def summary_csv(s: Summary) -> str:
    cell_rows = [
        ["mean", c.workflow, c.n, c.variant, c.beta, c.runs, c.mean_tec, c.mean_tet, c.deadline,
         c.feasible_runs, c.mean_overshoot, "", ""]
        for c in s.cells
    ]
    imp_rows = [
        ["improvement", i.workflow, "", i.variant, i.beta, "", "", "", "", "", "", i.baseline, i.cost_improvement]
        for i in s.improvements
    ]
    return _csv(
        ["kind", "workflow", "n", "variant", "beta", "runs", "mean_tec", "mean_tet", "deadline",
         "feasible_runs", "mean_overshoot_pct", "baseline", "cost_improvement_pct"],
        cell_rows + imp_rows,
    )


def read_runs_csv(text: str) -> list[ResultRow]:
    rows = []
    for d in csv.DictReader(io.StringIO(text)):
        rows.append(ResultRow(
            workflow=d["workflow"],
            n=int(d["n"]),
            variant=d["variant"],
            beta=float(d["beta"]),
            seed=int(d["seed"]),
            tec=float(d["tec"]),
            tet=float(d["tet"]),
            deadline=float(d["deadline"]),
            feasible=d["feasible"] == "1",
            overshoot=float(d["overshoot_pct"]),
        ))
    return rows
