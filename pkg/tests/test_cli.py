import json
import subprocess
import sys

import pytest

from sparsemix.cli import main
from sparsemix.experiments import ExperimentConfig, summary_path


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def body_json(out):
    return json.loads("\n".join(l for l in out.splitlines() if not l.startswith("# ")))


def test_boundary_report_for_idj(tmp_path, capsys):
    cfg = write(tmp_path, "b.json", {"model": {"family": "idj", "r": 0.25}})
    code, out, _ = run(capsys, "boundary", cfg, "--no-timestamp")
    assert code == 0
    report = json.loads(out)["report"]
    assert report["beta_star"] == pytest.approx(0.75, abs=1e-6)
    assert report["closed_form"] == pytest.approx(0.75)
    assert all(report["conditions"].values())


def test_tailcheck_warns_on_divergence(tmp_path, capsys):
    cfg = write(tmp_path, "t.json", {"model": {"family": "sparse_exponential", "r": 0.5},
                                     "gamma": 1.5, "n_values": [100, 1000, 10000]})
    code, out, err = run(capsys, "tailcheck", cfg, "--no-timestamp")
    assert code == 0
    assert json.loads(out)["report"]["verdict"] == "diverging"
    assert len([l for l in err.splitlines() if l.startswith("warning:")]) == 1


def test_empty_beta_grid_is_a_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "s.json", {"model": {"family": "idj", "r": 0.6}, "n_values": [100],
                                     "beta_grid": []})
    code, out, err = run(capsys, "sweep", cfg)
    assert code == 1
    assert err.strip() == "error: beta_grid: must be nonempty"


@pytest.mark.parametrize("content, field", [
    ({"model": {"family": "nope", "r": 1}}, "family"),
    ("{not json", "config_path"),
    ({"model": {"family": "idj"}}, "r"),
])
def test_bad_configs_exit_one_with_one_line(tmp_path, capsys, content, field):
    cfg = write(tmp_path, "c.json", content)
    code, _, err = run(capsys, "boundary", cfg)
    assert code == 1
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"error: {field}")


def test_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "rate", str(tmp_path / "absent.json"))
    assert code == 1
    assert "config_path" in err


def test_computation_errors_exit_two(tmp_path, capsys):
    cfg = write(tmp_path, "b.json", {"model": {"family": "curie_weiss", "theta": 0.5, "mu": 1},
                                     "statistic": "hc_classical",
                                     "observations": "obs.csv"})
    (tmp_path / "obs.csv").write_text("total\n" + "\n".join(["1"] * 20) + "\n")
    code, _, err = run(capsys, "hc", cfg)
    assert code == 2
    assert err.startswith("error:")


def test_rate_grid(tmp_path, capsys):
    cfg = write(tmp_path, "r.json", {"model": {"family": "idj", "r": 0.25},
                                     "grid": {"lo": -0.25, "hi": 0.25, "points": 3}})
    code, out, _ = run(capsys, "rate", cfg, "--no-timestamp")
    assert code == 0
    assert out.splitlines() == ["t,rate", "-0.25,0", "0,0.0625", "0.25,0.25"]


def test_simulate_then_hc(tmp_path, capsys):
    model = {"family": "idj", "r": 0.5}
    sim = write(tmp_path, "sim.json", {"model": model, "n": 200, "hypothesis": "alternative",
                                       "beta": 0.4})
    obs = tmp_path / "obs.csv"
    code, _, _ = run(capsys, "simulate", sim, "--seed", "3", "--out", str(obs), "--quiet")
    assert code == 0 and obs.read_text().startswith("x,signal\n")
    cfg = write(tmp_path, "hc.json", {"model": model, "observations": "obs.csv"})
    code, out, _ = run(capsys, "hc", cfg, "--no-timestamp")
    doc = json.loads(out)
    assert code == 0 and doc["n"] == 200
    assert doc["hc_star"]["statistic"] == pytest.approx(doc["hc_classical"]["statistic"],
                                                        abs=1e-12)


def test_hellinger_command(tmp_path, capsys):
    cfg = write(tmp_path, "h.json", {"model": {"family": "idj", "r": 0.25}, "beta": 0.5})
    code, out, _ = run(capsys, "hellinger", cfg, "--no-timestamp")
    assert code == 0
    assert json.loads(out)["trend"]["verdict"] == "supercritical"


def test_sweep_writes_csv_and_summary(tmp_path, capsys):
    doc = {"model": {"family": "idj", "r": 0.6}, "n_values": [200], "beta_grid": [0.6, 0.9],
           "replications": 10, "master_seed": 1}
    cfg = write(tmp_path, "s.json", doc)
    out_csv = tmp_path / "out.csv"
    code, out, _ = run(capsys, "sweep", cfg, "--out", str(out_csv), "--seed", "9")
    assert code == 0
    summary = json.loads(summary_path(out_csv).read_text())
    echoed = ExperimentConfig.from_dict(summary["config"])
    assert echoed.master_seed == 9
    assert echoed == ExperimentConfig.from_dict({**doc, "master_seed": 9,
                                                 "output_path": str(out_csv)})


def test_output_is_stable_apart_from_the_timestamp(tmp_path, capsys):
    cfg = write(tmp_path, "b.json", {"model": {"family": "low_rank", "r": 3, "k": 2, "p": 4}})
    _, first, _ = run(capsys, "boundary", cfg)
    _, second, _ = run(capsys, "boundary", cfg)
    assert first.splitlines()[0].startswith("# sparsemix boundary ")
    assert first.splitlines()[1:] == second.splitlines()[1:]
    _, plain, _ = run(capsys, "boundary", cfg, "--no-timestamp")
    assert plain.splitlines() == first.splitlines()[1:]


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "x.json"])
    assert info.value.code == 1


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "b.json", {"family": "idj", "r": 0.25})
    proc = subprocess.run([sys.executable, "-m", "sparsemix", "boundary", cfg, "--quiet"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["report"]["beta_star"] == pytest.approx(0.75, abs=1e-6)
