"""Workflow DAGs: construction, validation, loaders and structural analysis.

Tasks are indexed ``0 .. n-1`` in a topological order, with the entry task at
index 0 and the exit task at index ``n-1``.  Loaders always wrap the input
with a zero-weight virtual entry and exit; direct construction through
:meth:`TaskGraph.build` wraps only when the graph has several sources or sinks
(or when asked to).
"""

from __future__ import annotations

import heapq
import xml.etree.ElementTree as ET
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

BYTES_PER_GB = 2**30
ENTRY_LABEL = "__entry__"
EXIT_LABEL = "__exit__"


class WorkflowError(ValueError):
    """Base class for workflow loading and validation errors."""


class WorkflowFormatError(WorkflowError):
    """The input file could not be parsed."""


class WorkflowSemanticError(WorkflowError):
    """The input parsed but references things that do not exist."""


class WorkflowValidationError(WorkflowError):
    """The graph violates a structural invariant (cycle, self-loop, ...)."""


@dataclass(frozen=True)
class Task:
    id: int
    weight: float
    label: str | None = None


@dataclass(frozen=True, eq=False)
class TaskGraph:
    """Immutable workflow DAG.

    Use :meth:`build` rather than the raw constructor; it relabels tasks into
    topological order and adds the virtual entry/exit tasks.
    """

    tasks: tuple[Task, ...]
    edges: Mapping[tuple[int, int], float]
    succ: tuple[tuple[int, ...], ...] = field(repr=False)
    pred: tuple[tuple[int, ...], ...] = field(repr=False)

    def __post_init__(self):
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.tasks)

    @property
    def entry(self) -> int:
        return 0

    @property
    def exit(self) -> int:
        return len(self.tasks) - 1

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(t.weight for t in self.tasks)

    def volume(self, i: int, j: int) -> float:
        return self.edges[(i, j)]

    def label(self, i: int) -> str:
        lab = self.tasks[i].label
        return lab if lab is not None else str(i)

    @classmethod
    def build(
        cls,
        weights: Sequence[float],
        edges: Mapping[tuple[int, int], float] | Iterable[tuple[int, int, float]],
        labels: Sequence[str | None] | None = None,
        add_virtual: bool | None = None,
    ) -> "TaskGraph":
        """Build a graph from raw task weights and ``(src, dst) -> GB`` edges.

        ``add_virtual=None`` wraps only when there is more than one source or
        sink; ``True`` always wraps; ``False`` never does (and then the graph
        must already have a unique source and sink).
        """
        m = len(weights)
        if m == 0:
            raise WorkflowValidationError("empty workflow")
        if labels is None:
            labels = [None] * m
        if len(labels) != m:
            raise WorkflowValidationError("labels and weights differ in length")
        if isinstance(edges, Mapping):
            edge_items = [(int(a), int(b), float(v)) for (a, b), v in edges.items()]
        else:
            edge_items = [(int(a), int(b), float(v)) for a, b, v in edges]

        emap: dict[tuple[int, int], float] = {}
        for a, b, v in edge_items:
            if not (0 <= a < m and 0 <= b < m):
                raise WorkflowSemanticError(f"edge ({a}, {b}) references an unknown task")
            if a == b:
                raise WorkflowValidationError(f"self-loop on task {a}")
            if (a, b) in emap:
                raise WorkflowValidationError(f"duplicate edge ({a}, {b})")
            if v < 0:
                raise WorkflowValidationError(f"negative data volume on edge ({a}, {b})")
            emap[(a, b)] = v
        for i, w in enumerate(weights):
            if w < 0:
                raise WorkflowValidationError(f"negative weight on task {i}")

        succ = [[] for _ in range(m)]
        for a, b in emap:
            succ[a].append(b)
        order = _kahn_order(m, succ)
        if order is None:
            raise WorkflowValidationError("workflow contains a cycle")

        indeg = [0] * m
        for _, b in emap:
            indeg[b] += 1
        sources = [i for i in range(m) if indeg[i] == 0]
        sinks = [i for i in range(m) if not succ[i]]
        if add_virtual is None:
            add_virtual = len(sources) > 1 or len(sinks) > 1
        elif not add_virtual and (len(sources) > 1 or len(sinks) > 1):
            raise WorkflowValidationError(
                "graph needs a unique source and sink when add_virtual=False"
            )

        offset = 1 if add_virtual else 0
        new_index = {old: pos + offset for pos, old in enumerate(order)}
        n = m + 2 * offset
        new_weights = [0.0] * n
        new_labels: list[str | None] = [None] * n
        for old, new in new_index.items():
            new_weights[new] = float(weights[old])
            new_labels[new] = labels[old]
        new_edges = {(new_index[a], new_index[b]): v for (a, b), v in emap.items()}
        if add_virtual:
            new_labels[0] = ENTRY_LABEL
            new_labels[n - 1] = EXIT_LABEL
            for s in sources:
                new_edges[(0, new_index[s])] = 0.0
            for s in sinks:
                new_edges[(new_index[s], n - 1)] = 0.0
        return cls.from_indexed(new_weights, new_edges, new_labels)

    @classmethod
    def from_indexed(cls, weights, edges, labels=None) -> "TaskGraph":
        """Construct directly from an already topologically indexed graph."""
        n = len(weights)
        labels = labels if labels is not None else [None] * n
        succ = [[] for _ in range(n)]
        pred = [[] for _ in range(n)]
        for a, b in sorted(edges):
            succ[a].append(b)
            pred[b].append(a)
        tasks = tuple(Task(i, float(weights[i]), labels[i]) for i in range(n))
        return cls(
            tasks=tasks,
            edges=dict(sorted(edges.items())),
            succ=tuple(tuple(s) for s in succ),
            pred=tuple(tuple(p) for p in pred),
        )


def _kahn_order(m: int, succ: Sequence[Sequence[int]]) -> list[int] | None:
    # smallest-index-first keeps relabelling stable for already sorted input
    indeg = [0] * m
    for s in succ:
        for b in s:
            indeg[b] += 1
    heap = [i for i in range(m) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for b in succ[v]:
            indeg[b] -= 1
            if indeg[b] == 0:
                heapq.heappush(heap, b)
    return order if len(order) == m else None


def _validate(g: TaskGraph) -> None:
    n = len(g.tasks)
    if n == 0:
        raise WorkflowValidationError("empty workflow")
    for (a, b), v in g.edges.items():
        if a == b:
            raise WorkflowValidationError(f"self-loop on task {a}")
        if a >= b:
            raise WorkflowValidationError(
                f"edge ({a}, {b}) goes against index order; tasks must be topologically indexed"
            )
        if v < 0:
            raise WorkflowValidationError(f"negative data volume on edge ({a}, {b})")
    for t in g.tasks:
        if t.weight < 0:
            raise WorkflowValidationError(f"negative weight on task {t.id}")
    if g.pred[0]:
        raise WorkflowValidationError("entry task has predecessors")
    if g.succ[n - 1]:
        raise WorkflowValidationError("exit task has successors")
    for i in range(1, n):
        if not g.pred[i]:
            raise WorkflowValidationError(f"task {i} is a second source")
    for i in range(n - 1):
        if not g.succ[i]:
            raise WorkflowValidationError(f"task {i} is a second sink")


# --------------------------------------------------------------------------
# loaders


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def load_dax(path: str | Path, runtime_scale: float = 1.0) -> TaskGraph:
    """Read the Pegasus DAX subset produced by the workflow generator.

    Task weight is ``runtime * runtime_scale``.  The data volume of an edge is
    the total size (GB) of files the parent declares as output and the child
    declares as input.
    """
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise WorkflowFormatError(f"{path}: {exc}") from exc
    except OSError:
        raise

    ids: list[str] = []
    weights: list[float] = []
    outputs: list[dict[str, int]] = []
    inputs: list[dict[str, int]] = []
    index: dict[str, int] = {}
    deps: list[tuple[str, str]] = []

    for el in root:
        tag = _local(el.tag)
        if tag == "job":
            jid = el.get("id")
            if jid is None:
                raise WorkflowFormatError(f"{path}: job without id")
            if jid in index:
                raise WorkflowSemanticError(f"{path}: duplicate job id {jid}")
            try:
                runtime = float(el.get("runtime", "0"))
            except ValueError as exc:
                raise WorkflowFormatError(f"{path}: bad runtime on job {jid}") from exc
            outs: dict[str, int] = {}
            ins: dict[str, int] = {}
            for use in el:
                if _local(use.tag) != "uses":
                    continue
                fname = use.get("file") or use.get("name")
                link = use.get("link")
                try:
                    size = int(float(use.get("size", "0")))
                except ValueError as exc:
                    raise WorkflowFormatError(f"{path}: bad file size in job {jid}") from exc
                if fname is None:
                    raise WorkflowFormatError(f"{path}: uses element without file in job {jid}")
                if link == "output":
                    outs[fname] = outs.get(fname, 0) + size
                elif link == "input":
                    ins[fname] = ins.get(fname, 0) + size
            index[jid] = len(ids)
            ids.append(jid)
            weights.append(runtime * runtime_scale)
            outputs.append(outs)
            inputs.append(ins)
        elif tag == "child":
            cref = el.get("ref")
            for par in el:
                if _local(par.tag) == "parent":
                    deps.append((par.get("ref"), cref))

    if not ids:
        raise WorkflowFormatError(f"{path}: no job elements")

    volumes: dict[tuple[int, int], float] = {}
    for pref, cref in deps:
        if pref not in index or cref not in index:
            missing = pref if pref not in index else cref
            raise WorkflowSemanticError(f"{path}: dependency on undeclared job {missing}")
        a, b = index[pref], index[cref]
        shared = outputs[a].keys() & inputs[b].keys()
        nbytes = sum(outputs[a][f] for f in shared)
        volumes[(a, b)] = volumes.get((a, b), 0.0) + nbytes / BYTES_PER_GB

    return TaskGraph.build(weights, volumes, labels=ids, add_virtual=True)


def load_adjacency(path: str | Path, add_virtual: bool | None = None) -> TaskGraph:
    """Read the plain-text fixture format.

    Two-field lines ``id weight`` declare tasks, three-field lines
    ``from to volume_gb`` declare edges.  Blank lines and ``#`` comments are
    ignored.  Task ids are arbitrary tokens.
    """
    text = Path(path).read_text()
    return parse_adjacency(text, add_virtual=add_virtual, source=str(path))


def parse_adjacency(text: str, add_virtual: bool | None = None, source: str = "<string>") -> TaskGraph:
    ids: list[str] = []
    weights: list[float] = []
    index: dict[str, int] = {}
    raw_edges: list[tuple[str, str, float, int]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if len(parts) == 2:
                if parts[0] in index:
                    raise WorkflowSemanticError(f"{source}:{lineno}: duplicate task {parts[0]}")
                index[parts[0]] = len(ids)
                ids.append(parts[0])
                weights.append(float(parts[1]))
            elif len(parts) == 3:
                raw_edges.append((parts[0], parts[1], float(parts[2]), lineno))
            else:
                raise WorkflowFormatError(f"{source}:{lineno}: expected 2 or 3 fields")
        except ValueError as exc:
            if isinstance(exc, WorkflowError):
                raise
            raise WorkflowFormatError(f"{source}:{lineno}: {exc}") from exc
    edges: list[tuple[int, int, float]] = []
    for a, b, v, lineno in raw_edges:
        if a not in index or b not in index:
            raise WorkflowSemanticError(f"{source}:{lineno}: edge references unknown task")
        edges.append((index[a], index[b], v))
    return TaskGraph.build(weights, edges, labels=ids, add_virtual=add_virtual)


def dump_adjacency(g: TaskGraph) -> str:
    lines = [f"{g.label(i)} {t.weight!r}" for i, t in enumerate(g.tasks)]
    lines += [f"{g.label(a)} {g.label(b)} {v!r}" for (a, b), v in g.edges.items()]
    return "\n".join(lines) + "\n"


def load_workflow(path: str | Path) -> TaskGraph:
    """Dispatch on extension: ``.xml``/``.dax`` are DAX, anything else is text."""
    suffix = Path(path).suffix.lower()
    if suffix in (".xml", ".dax"):
        return load_dax(path)
    return load_adjacency(path)


# --------------------------------------------------------------------------
# structure


def top_level(g: TaskGraph) -> list[int]:
    """Topological level of every task, by breadth-first traversal from the entry."""
    n = g.n
    level = [0] * n
    indeg = [len(p) for p in g.pred]
    queue = deque([g.entry])
    while queue:
        v = queue.popleft()
        for s in g.succ[v]:
            level[s] = max(level[s], level[v] + 1)
            indeg[s] -= 1
            if indeg[s] == 0:
                queue.append(s)
    return level


def random_topological_order(g: TaskGraph, rng: np.random.Generator) -> list[int]:
    """Kahn's algorithm picking uniformly among the ready tasks at each step."""
    indeg = [len(p) for p in g.pred]
    ready = [i for i in range(g.n) if indeg[i] == 0]
    order = []
    while ready:
        k = int(rng.integers(len(ready)))
        ready[k], ready[-1] = ready[-1], ready[k]
        v = ready.pop()
        order.append(v)
        for s in g.succ[v]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    return order


def descendants_bits(g: TaskGraph) -> list[int]:
    """Reachability as Python-int bitsets; bit j of ``desc[i]`` set iff i reaches j."""
    desc = [0] * g.n
    for i in range(g.n - 1, -1, -1):
        bits = 0
        for s in g.succ[i]:
            bits |= desc[s] | (1 << s)
        desc[i] = bits
    return desc


def max_parallel_tasks(g: TaskGraph) -> list[int]:
    """Greedy antichain of tasks that can run concurrently.

    Seeds the set with the widest topological level (smallest level on ties)
    and then scans lower levels in increasing order, adding any task unrelated
    to every member.  Not always a maximum antichain.
    """
    level = top_level(g)
    counts: dict[int, int] = {}
    for lv in level:
        counts[lv] = counts.get(lv, 0) + 1
    widest = max(counts.values())
    max_lvl = min(lv for lv, c in counts.items() if c == widest)

    desc = descendants_bits(g)
    members = [v for v in range(g.n) if level[v] == max_lvl]
    member_bits = 0
    reach_bits = 0  # union of members' descendants
    for v in members:
        member_bits |= 1 << v
        reach_bits |= desc[v]
    for v in sorted(range(g.n), key=lambda v: (level[v], v)):
        if level[v] >= max_lvl:
            continue
        related = (desc[v] & member_bits) or (reach_bits >> v) & 1
        if not related:
            members.append(v)
            member_bits |= 1 << v
            reach_bits |= desc[v]
    return sorted(members)


# --------------------------------------------------------------------------
# synthetic graphs


def layered_dag(
    n_tasks: int,
    rng: np.random.Generator,
    width: int | None = None,
    density: float = 0.3,
    runtime: tuple[float, float] = (10.0, 500.0),
    volume_gb: tuple[float, float] = (0.001, 0.05),
) -> TaskGraph:
    """Random layered DAG with ``n_tasks`` real tasks plus virtual entry/exit.

    Tasks are split into layers of at most ``width`` tasks; every task in a
    layer gets at least one parent in the previous layer and additional
    parents from it with probability ``density``.
    """
    if n_tasks < 1:
        raise ValueError("n_tasks must be positive")
    if width is None:
        width = max(1, int(round(np.sqrt(n_tasks))))
    layers: list[list[int]] = []
    next_id = 0
    while next_id < n_tasks:
        size = int(rng.integers(1, width + 1))
        size = min(size, n_tasks - next_id)
        layers.append(list(range(next_id, next_id + size)))
        next_id += size
    weights = rng.uniform(runtime[0], runtime[1], size=n_tasks).tolist()
    edges: dict[tuple[int, int], float] = {}
    for prev, cur in zip(layers, layers[1:]):
        for v in cur:
            parents = {prev[int(rng.integers(len(prev)))]}
            for u in prev:
                if rng.random() < density:
                    parents.add(u)
            for u in sorted(parents):
                edges[(u, v)] = float(rng.uniform(volume_gb[0], volume_gb[1]))
    return TaskGraph.build(weights, edges, labels=[f"t{i}" for i in range(n_tasks)], add_virtual=True)


def random_dag(n_tasks: int, rng: np.random.Generator, edge_prob: float = 0.3) -> TaskGraph:
    """Erdos-Renyi style DAG over a random permutation, wrapped with entry/exit."""
    perm = rng.permutation(n_tasks).tolist()
    edges = {}
    for a in range(n_tasks):
        for b in range(a + 1, n_tasks):
            if rng.random() < edge_prob:
                edges[(perm[a], perm[b])] = float(rng.uniform(0.0, 0.05))
    weights = rng.uniform(0.0, 200.0, size=n_tasks).tolist()
    return TaskGraph.build(weights, edges, add_virtual=True)
