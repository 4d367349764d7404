import csv

from grimlab.cli import main

SMALL = ["--override", "n_epochs=4", "--override", "start_exploration=2", "--override", "n_warmup=3",
         "--override", "goals_per_epoch=3", "--override", "fit_sample_size=200", "--override", "d=4",
         "--override", "candidate_ks=1,2", "--override", "cluster_fit_size=100"]


def test_run_writes_a_run_directory(tmp_path, capsys):
    assert main(["run", *SMALL, "--seed", "3", "--out", str(tmp_path / "r")]) == 0
    assert {p.name for p in (tmp_path / "r").iterdir()} >= {"metrics.csv", "config.json", "config.txt"}
    assert "seed=3" in capsys.readouterr().out


def test_run_reads_a_config_file(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("strategy = uniform\nn_epochs = 2\nstart_exploration = 1\nn_warmup = 2\n"
                   "goals_per_epoch = 2\nfit_sample_size = 100\nd = 3\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "r" / "metrics.csv")))
    assert len(rows) == 2


def test_compare_aggregates_runs(tmp_path, capsys):
    for seed in (0, 1):
        main(["run", *SMALL, "--seed", str(seed), "--out", str(tmp_path / "cb" / f"s{seed}")])
        main(["run", *SMALL, "--override", "wrap_grimgep=true", "--seed", str(seed),
              "--out", str(tmp_path / "grim" / f"s{seed}")])
    out = tmp_path / "summary.csv"
    assert main(["compare", "--runs", str(tmp_path / "cb"), str(tmp_path / "grim"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert {r["config"] for r in rows} == {"CountBased", "GRIM-CountBased"}
    assert all(r["n_seeds"] == "2" for r in rows)
    tests = list(csv.DictReader(open(tmp_path / "summary_tests.csv")))
    assert len(tests) == 3
    assert "GRIM-CountBased" in capsys.readouterr().out


def test_ablate_runs_both_modes(tmp_path):
    assert main(["ablate", *SMALL, "--seeds", "2", "--out", str(tmp_path)]) == 0
    names = {r["config"] for r in csv.DictReader(open(tmp_path / "summary.csv"))}
    assert names == {"GRIM-CountBased", "GRIM-UNI-CountBased"}


def test_bad_override_exits_with_code_2(tmp_path, capsys):
    assert main(["run", "--override", "alpha=3", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_compare_without_runs(tmp_path):
    assert main(["compare", "--runs", str(tmp_path), "--out", str(tmp_path / "s.csv")]) == 1
