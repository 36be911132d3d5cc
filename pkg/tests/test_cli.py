import json

from click.testing import CliRunner

from dialmark.bench import NO_MODE, CellKey, CellResult, aggregate, read_results
from dialmark.cli import main
from dialmark.ontology import load_itemset
from dialmark.plots import domain_average_figure, emit_plots, per_environment_figure


def fake_results():
    out = []
    for env in (1, 3):
        for d in ("fin", "cr"):
            for algo, mode in [("RQ", NO_MODE), ("HDC", NO_MODE), ("GP", "s")]:
                for seed in (0, 1):
                    out.append(CellResult(CellKey(env, d, algo, mode, seed), 10, 10, env + seed + 0.5, 0.5))
    return out


def test_run_then_report(tmp_path):
    runner = CliRunner()
    out = tmp_path / "r.csv"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"env": [1], "domain": ["fin"], "algo": ["RQ"], "seeds": 1, "train": 10, "test": 10}))
    res = runner.invoke(main, ["run", "--config", str(cfg), "--algo", "HDC", "--algo", "DQN", "--mode", "bs", "--seeds", "2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = read_results(out)
    assert sorted({r.key.label for r in rows}) == ["DQN_bs", "HDC"]
    assert len(rows) == 4
    plots = tmp_path / "plots"
    res = runner.invoke(main, ["report", "--in", str(out), "--out-dir", str(plots)])
    assert res.exit_code == 0, res.output
    summary = json.loads((plots / "summary.json").read_text())
    assert set(summary["grand_mean"]) == {"DQN_bs", "HDC"}
    assert (plots / "rewards_by_domain.png").exists()


def test_run_rejects_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"env": [9]}')
    res = CliRunner().invoke(main, ["run", "--config", str(cfg), "--out", str(tmp_path / "r.csv")])
    assert res.exit_code != 0 and "unknown environment" in res.output


def test_gen_domain(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"name": "mini", "n_items": 12, "constrainable_slots": {"a": 3, "b": 4}, "group1_slot_names": ["a"], "seed": 1}))
    out = tmp_path / "d.json"
    res = CliRunner().invoke(main, ["gen-domain", "--spec", str(spec), "--out", str(out)])
    assert res.exit_code == 0, res.output
    d = load_itemset(out)
    assert len(d) == 12 and [s.name for s in d.group1_slots] == ["a"]
    spec.write_text(json.dumps({"n_items": 50, "constrainable_slots": {"a": 2}}))
    res = CliRunner().invoke(main, ["gen-domain", "--spec", str(spec), "--out", str(out)])
    assert res.exit_code != 0


def test_plot_panels():
    summary = aggregate(fake_results())
    fig = per_environment_figure(summary)
    assert len(fig.axes) == 2
    assert len(domain_average_figure(summary).axes) == 1
    only_env1 = aggregate([r for r in fake_results() if r.key.env_id == 1])
    assert len(per_environment_figure(only_env1).axes) == 1


def test_plots_are_deterministic(tmp_path):
    summary = aggregate(fake_results())
    a = emit_plots(summary, tmp_path / "a", "svg")
    b = emit_plots(summary, tmp_path / "b", "svg")
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]
