import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cedces.synthetic import epigenomics_dax, ligo_dax
from cedces.workflow import (
    TaskGraph,
    WorkflowFormatError,
    WorkflowSemanticError,
    WorkflowValidationError,
    dump_adjacency,
    layered_dag,
    load_dax,
    load_workflow,
    max_parallel_tasks,
    parse_adjacency,
    random_dag,
    random_topological_order,
    top_level,
)

import oracles

NS = 'xmlns="http://pegasus.isi.edu/schema/DAX"'


def chain3():
    return TaskGraph.build([0, 10, 0], {(0, 1): 0.0, (1, 2): 0.0})


def diamond():
    return TaskGraph.build([0, 6, 6, 0], {(0, 1): 0.0, (0, 2): 0.0, (1, 3): 0.0, (2, 3): 0.0})


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# --- loading -----------------------------------------------------------


def test_minimal_dax_is_wrapped(tmp_path):
    p = write(tmp_path, "one.xml", f'<adag {NS}><job id="A" name="x" runtime="12.5"/></adag>')
    g = load_dax(p)
    assert g.n == 3
    assert g.weights == (0.0, 12.5, 0.0)
    assert g.edges == {(0, 1): 0.0, (1, 2): 0.0}


def test_dax_shared_file_gives_edge_volume(tmp_path):
    two_gb = 2 * 2**30
    text = f"""<adag {NS}>
      <job id="A" runtime="1"><uses file="f" link="output" size="{two_gb}"/></job>
      <job id="B" runtime="2"><uses file="f" link="input" size="{two_gb}"/></job>
      <child ref="B"><parent ref="A"/></child>
    </adag>"""
    g = load_dax(write(tmp_path, "two.xml", text))
    assert g.n == 4
    assert g.volume(1, 2) == 2.0


def test_dax_duplicate_files_are_summed(tmp_path):
    gb = 2**30
    text = f"""<adag {NS}>
      <job id="A" runtime="1"><uses file="f" link="output" size="{gb}"/><uses file="g" link="output" size="{gb}"/></job>
      <job id="B" runtime="2"><uses file="f" link="input" size="{gb}"/><uses file="g" link="input" size="{gb}"/></job>
      <child ref="B"><parent ref="A"/></child>
    </adag>"""
    assert load_dax(write(tmp_path, "dup.xml", text)).volume(1, 2) == 2.0


def test_dax_errors(tmp_path):
    with pytest.raises(WorkflowFormatError):
        load_dax(write(tmp_path, "bad.xml", "<adag><job"))
    undeclared = f'<adag {NS}><job id="A" runtime="1"/><child ref="A"><parent ref="Z"/></child></adag>'
    with pytest.raises(WorkflowSemanticError):
        load_dax(write(tmp_path, "undeclared.xml", undeclared))
    cyc = f"""<adag {NS}><job id="A" runtime="1"/><job id="B" runtime="1"/>
      <child ref="A"><parent ref="B"/></child><child ref="B"><parent ref="A"/></child></adag>"""
    with pytest.raises(WorkflowValidationError):
        load_dax(write(tmp_path, "cyc.xml", cyc))


def test_epigenomics_24_jobs_gives_26_nodes(tmp_path):
    text = epigenomics_dax(5, np.random.default_rng(1))
    jobs = oracles.count_dax_jobs(text)
    assert jobs == 24
    g = load_dax(write(tmp_path, "epi.xml", text))
    assert g.n == jobs + 2 == 26


def test_ligo_job_count(tmp_path):
    text = ligo_dax(2, 12, np.random.default_rng(0))
    assert oracles.count_dax_jobs(text) == 100
    assert load_dax(write(tmp_path, "ligo.xml", text)).n == 102


def test_adjacency_roundtrip(tmp_path):
    text = "# fixture\na 5\nb 7\nc 0\na b 0.5\na c 0.25  # trailing comment\n"
    g = parse_adjacency(text)
    # two sinks, so the graph gets a virtual entry and exit
    assert g.n == 5 and g.weights == (0.0, 5.0, 7.0, 0.0, 0.0)
    assert g.volume(1, 2) == 0.5 and g.volume(1, 3) == 0.25
    p = write(tmp_path, "g.txt", dump_adjacency(g))
    h = load_workflow(p)
    assert h.weights == g.weights and h.edges == g.edges


def test_adjacency_errors():
    with pytest.raises(WorkflowFormatError):
        parse_adjacency("a 1 2 3\n")
    with pytest.raises(WorkflowSemanticError):
        parse_adjacency("a 1\na b 0.1\n")
    with pytest.raises(WorkflowValidationError):
        parse_adjacency("a 1\nb 1\na b 0\nb a 0\n")
    with pytest.raises(WorkflowValidationError):
        parse_adjacency("a -1\n")


def test_build_relabels_topologically():
    g = TaskGraph.build([1, 2, 3], {(2, 1): 0.1, (1, 0): 0.2})
    assert g.weights == (3.0, 2.0, 1.0)
    assert all(a < b for a, b in g.edges)


# --- levels and orders ---------------------------------------------------


def test_top_level_examples():
    assert top_level(chain3()) == [0, 1, 2]
    assert top_level(diamond()) == [0, 1, 1, 2]


def test_random_topological_order_chain_and_diamond():
    assert all(random_topological_order(chain3(), np.random.default_rng(s)) == [0, 1, 2] for s in range(10))
    seen = {tuple(random_topological_order(diamond(), np.random.default_rng(s))) for s in range(100)}
    assert seen == {(0, 1, 2, 3), (0, 2, 1, 3)}
    assert len(list(nx.all_topological_sorts(oracles.to_nx(diamond())))) == 2
    a = random_topological_order(diamond(), np.random.default_rng(7))
    assert a == random_topological_order(diamond(), np.random.default_rng(7))


# --- maximum parallel set -----------------------------------------------


def test_max_parallel_examples():
    assert max_parallel_tasks(diamond()) == [1, 2]
    assert len(max_parallel_tasks(chain3())) == 1


def test_max_parallel_ignores_higher_levels():
    # s -> a, b, c ; a -> d, e ; everything -> t
    g = TaskGraph.build(
        [0, 1, 1, 1, 1, 1, 0],
        {(0, 1): 0, (0, 2): 0, (0, 3): 0, (1, 4): 0, (1, 5): 0, (2, 6): 0, (3, 6): 0, (4, 6): 0, (5, 6): 0},
    )
    assert top_level(g)[1:6] == [1, 1, 1, 2, 2]
    assert max_parallel_tasks(g) == [1, 2, 3]


def test_max_parallel_can_miss_larger_antichain():
    # level 1 and level 2 both have width 3; the smaller level wins the tie
    g = TaskGraph.build(
        [0, 1, 1, 1, 1, 1, 1, 0],
        {(0, 1): 0, (0, 2): 0, (0, 3): 0, (1, 4): 0, (1, 5): 0, (1, 6): 0,
         (2, 7): 0, (3, 7): 0, (4, 7): 0, (5, 7): 0, (6, 7): 0},
    )
    assert max_parallel_tasks(g) == [1, 2, 3]
    assert oracles.is_antichain(g, [2, 3, 4, 5, 6])


dag_params = st.tuples(st.integers(1, 18), st.integers(0, 2**32 - 1), st.floats(0.05, 0.9))


@settings(max_examples=200, deadline=None)
@given(dag_params)
def test_max_parallel_is_antichain(params):
    n, seed, p = params
    g = random_dag(n, np.random.default_rng(seed), edge_prob=p)
    members = max_parallel_tasks(g)
    assert oracles.is_antichain(g, members)
    levels = top_level(g)
    widest = max(levels.count(lv) for lv in set(levels))
    assert len(members) >= widest


@settings(max_examples=100, deadline=None)
@given(dag_params)
def test_top_level_properties(params):
    n, seed, p = params
    g = random_dag(n, np.random.default_rng(seed), edge_prob=p)
    lv = top_level(g)
    assert lv == oracles.levels_by_longest_path(g)
    assert lv[g.entry] == 0
    assert all(lv[a] < lv[b] for a, b in g.edges)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_wrapping_shifts_levels_by_one(seed):
    rng = np.random.default_rng(seed)
    # single source and sink so the bare graph is valid on its own
    m = int(rng.integers(3, 10))
    edges = {(0, m - 1): 0.0}
    for i in range(1, m - 1):
        edges[(0, i)] = 0.0
        edges[(i, m - 1)] = 0.0
        for j in range(i + 1, m - 1):
            if rng.random() < 0.3:
                edges[(i, j)] = 0.0
    w = [1.0] * m
    bare = TaskGraph.build(w, edges, add_virtual=False)
    wrapped = TaskGraph.build(w, edges, add_virtual=True)
    assert [v + 1 for v in top_level(bare)] == top_level(wrapped)[1:-1]


def test_generators_are_valid():
    g = layered_dag(100, np.random.default_rng(0))
    assert g.n == 102
    assert all(a < b for a, b in g.edges)
    assert g.weights[0] == 0.0 and g.weights[-1] == 0.0
