"""Command line entry point: ``cedces {bench,schedule,min-makespan,testbed,generate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import (
    PAPER_BETAS,
    ExperimentConfig,
    canonical_variant,
    resolve_system,
    resolve_workflow,
    run_experiment,
    summarize,
)
from .cloud import default_testbed, save_system
from .heft import heft_makespan
from .optimizer import SwarmConfig, format_run_report, run
from .schedule import format_schedule, verify_schedule
from .synthetic import epigenomics_dax, ligo_dax
from .workflow import dump_adjacency, layered_dag


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _names(text: str) -> list[str]:
    return [canonical_variant(v.strip()) for v in text.split(",") if v.strip()]


def _scale(args) -> tuple[int, int]:
    if args.paper_scale:
        return 100, 1000
    return args.particles, args.iterations


def cmd_bench(args) -> int:
    particles, iterations = _scale(args)
    cfg = ExperimentConfig(
        workflows=args.workflow,
        betas=args.beta,
        repetitions=args.reps,
        variants=args.algo,
        base_seed=args.seed,
        num_particles=particles,
        iterations=iterations,
        system=args.system,
        out_dir=args.out,
        workers=args.workers,
        pin_virtual=args.pin_virtual_tasks,
    )
    rows = run_experiment(cfg)
    summary = summarize(rows)
    for c in summary.cells:
        print(
            f"{c.workflow:>16} beta={c.beta:<5g} {c.variant:<16} "
            f"TEC={c.mean_tec:.4f} TET={c.mean_tet:.1f} D={c.deadline:.1f} "
            f"feasible={c.feasible_runs}/{c.runs} overshoot={c.mean_overshoot:.2f}%"
        )
    return 0


def cmd_schedule(args) -> int:
    g = resolve_workflow(args.workflow)
    system = resolve_system(args.system)
    if args.deadline is not None:
        deadline = args.deadline
    else:
        deadline = args.beta * heft_makespan(g, system)
    particles, iterations = _scale(args)
    cfg = SwarmConfig(
        deadline=deadline,
        num_particles=particles,
        iterations=iterations,
        seed=args.seed,
        variant=canonical_variant(args.algo),
        pin_virtual=args.pin_virtual_tasks,
        workers=args.workers,
    )
    result = run(g, system, cfg)
    text = format_schedule(result.schedule)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(format_run_report(result, args.out))
    problems = verify_schedule(result.schedule, g, system)
    for p in problems:
        print(f"verify: {p}", file=sys.stderr)
    f = result.fitness
    print(f"TEC={f.tec:.6f} TET={f.tet:.3f} D={deadline:.3f} feasible={f.feasible}", file=sys.stderr)
    return 1 if problems else 0


def cmd_min_makespan(args) -> int:
    g = resolve_workflow(args.workflow)
    print(repr(heft_makespan(g, resolve_system(args.system))))
    return 0


def cmd_testbed(args) -> int:
    save_system(default_testbed(), args.out)
    return 0


def cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "layered":
        text = dump_adjacency(layered_dag(args.n, rng))
    elif args.kind == "epigenomics":
        lanes = max(1, (args.n - 4) // 4)
        text = epigenomics_dax(lanes, rng)
    else:
        width = max(1, (args.n - 2) // 4)
        text = ligo_dax(1, width, rng)
    Path(args.out).write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cedces", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def swarm_opts(sp):
        sp.add_argument("--system", help="testbed JSON (default: built-in six-cloud testbed)")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--particles", type=int, default=30)
        sp.add_argument("--iterations", type=int, default=200)
        sp.add_argument("--paper-scale", action="store_true", help="100 particles, 1000 iterations")
        sp.add_argument("--pin-virtual-tasks", action="store_true")
        sp.add_argument("--workers", type=int, default=1)

    b = sub.add_parser("bench", help="sweep deadlines and seeds, write CSV tables")
    b.add_argument("--workflow", nargs="+", required=True, help="DAX/text files or layered:<n>[:<seed>]")
    b.add_argument("--beta", type=_floats, default=list(PAPER_BETAS))
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--algo", type=_names, default=["cedces", "random-init-pso"])
    b.add_argument("--out", required=True)
    swarm_opts(b)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("schedule", help="schedule one workflow")
    s.add_argument("--workflow", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--deadline", type=float)
    g.add_argument("--beta", type=float, default=2.0)
    s.add_argument("--algo", default="cedces")
    s.add_argument("--out")
    s.add_argument("--report")
    swarm_opts(s)
    s.set_defaults(func=cmd_schedule)

    m = sub.add_parser("min-makespan", help="print the HEFT makespan Min(G)")
    m.add_argument("--workflow", required=True)
    m.add_argument("--system")
    m.set_defaults(func=cmd_min_makespan)

    t = sub.add_parser("testbed", help="write the default testbed as JSON")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_testbed)

    gen = sub.add_parser("generate", help="write a synthetic workflow")
    gen.add_argument("kind", choices=["layered", "epigenomics", "ligo"])
    gen.add_argument("--n", type=int, default=24)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
