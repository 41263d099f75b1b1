import json

from cedces.cli import _scale, build_parser, main
from cedces.cloud import default_testbed, load_system
from cedces.optimizer import SwarmConfig
from cedces.schedule import parse_schedule, verify_schedule
from cedces.workflow import load_workflow


def test_testbed_and_generate(tmp_path):
    sys_path = tmp_path / "sys.json"
    assert main(["testbed", "--out", str(sys_path)]) == 0
    assert len(json.loads(sys_path.read_text())["providers"]) == 6
    assert load_system(sys_path).n_types == 24
    for kind, n in (("layered", 30), ("epigenomics", 24), ("ligo", 30)):
        suffix = ".txt" if kind == "layered" else ".xml"
        out = tmp_path / f"{kind}{suffix}"
        assert main(["generate", kind, "--n", str(n), "--seed", "3", "--out", str(out)]) == 0
        assert load_workflow(out).n == n + 2


def test_min_makespan(tmp_path, capsys):
    wf = tmp_path / "one.txt"
    wf.write_text("a 10\n")
    assert main(["min-makespan", "--workflow", str(wf)]) == 0
    assert capsys.readouterr().out.strip() == "97.625"


def test_schedule_command(tmp_path, capsys):
    wf = tmp_path / "w.txt"
    main(["generate", "layered", "--n", "12", "--out", str(wf)])
    out, rep = tmp_path / "s.txt", tmp_path / "r.txt"
    code = main([
        "schedule", "--workflow", str(wf), "--beta", "5", "--algo", "pso",
        "--particles", "5", "--iterations", "4", "--seed", "1", "--out", str(out), "--report", str(rep),
    ])
    assert code == 0
    sys = default_testbed()
    s = parse_schedule(out.read_text(), sys)
    assert verify_schedule(s, load_workflow(wf), sys) == []
    report = rep.read_text().splitlines()
    assert report[0] == "run v1" and "variant random-init-pso" in report
    assert report[-1] == f"schedule {out}"
    assert "TEC=" in capsys.readouterr().err


def test_bench_command(tmp_path, capsys):
    out = tmp_path / "bench"
    code = main([
        "bench", "--workflow", "layered:10:1", "--beta", "2,15", "--reps", "2",
        "--algo", "cedces,pso", "--particles", "4", "--iterations", "3", "--out", str(out),
    ])
    assert code == 0
    assert {p.name for p in out.iterdir()} == {"runs.csv", "summary.csv", "timings.csv", "schedules"}
    assert len((out / "runs.csv").read_text().splitlines()) == 1 + 2 * 2 * 2
    assert "random-init-pso" in capsys.readouterr().out


def test_paper_scale_flag():
    args = build_parser().parse_args(["schedule", "--workflow", "x", "--paper-scale"])
    assert _scale(args) == (100, 1000)
    cfg = SwarmConfig.paper_scale(1.0)
    assert (cfg.num_particles, cfg.iterations) == _scale(args)
