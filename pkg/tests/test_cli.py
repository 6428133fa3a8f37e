import csv
import math
import subprocess
import sys
from pathlib import Path

import pytest

from fixtures.make_regression_fixtures import FIXTURES, produce
from glassanneal.cli import main
from glassanneal.config import RunManifest


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def assert_well_formed(path):
    header, rows = read_csv(path)
    assert header
    for r in rows:
        assert len(r) == len(header)
        for cell in r:
            if cell:
                assert math.isfinite(float(cell))
    return header, rows


# --------------------------------------------------------------------------- theory


def test_theory_index_vs_energy(tmp_path):
    assert main(["theory", "--mixture", "3:1.0", "--table", "index-vs-energy", "--points", "101", "--out", str(tmp_path)]) == 0
    header, rows = assert_well_formed(tmp_path / "index_vs_energy.csv")
    assert header == ["eps", "alpha", "lambda_bar"]
    assert len(rows) == 101
    assert float(rows[50][0]) == 0.0
    assert float(rows[50][1]) == pytest.approx(0.5, abs=1e-15)
    # eps_c < 0 is the bottom of the band, where every direction curves upward
    assert float(rows[0][1]) == pytest.approx(0.0, abs=1e-12)
    assert float(rows[-1][1]) == pytest.approx(1.0, abs=1e-12)


def test_theory_constants_report(tmp_path, capsys):
    assert main(["theory", "--mixture", "3:1.0", "--constants", "--out", str(tmp_path)]) == 0
    report = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    assert float(report["eps_c"]) == pytest.approx(-2.04124, abs=5e-6)
    for key in ("f0", "f1", "f2", "P", "Q", "C1", "C2", "M00", "M01", "M11"):
        assert key in report
    m = RunManifest.read(tmp_path / "manifest.txt")
    assert float(m.extra["eps_c"]) == pytest.approx(-2.04124, abs=5e-6)


def test_theory_all_tables(tmp_path):
    assert main(["theory", "--table", "all", "--points", "21", "--n", "50", "--out", str(tmp_path)]) == 0
    for name in ("semicircle.csv", "index_vs_mean.csv", "index_vs_energy.csv", "complexity.csv", "constants.txt"):
        assert (tmp_path / name).exists()
    for name in ("semicircle.csv", "index_vs_mean.csv", "complexity.csv"):
        assert_well_formed(tmp_path / name)
    _, rows = read_csv(tmp_path / "complexity.csv")
    assert len(rows) == 21 * 21


@pytest.mark.parametrize("mixture", ["1:1.0", "3:-1", "x", "2.5:1"])
def test_theory_bad_mixture_exits_2(tmp_path, capsys, mixture):
    assert main(["theory", "--mixture", mixture, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    if mixture == "1:1.0":
        assert "p >= 2" in err or "p ≥ 2" in err


def test_unknown_flag_exits_2(capsys):
    assert main(["theory", "--bogus"]) == 2


# --------------------------------------------------------------------------- glass


def test_glass_goe(tmp_path):
    assert main(["glass", "goe", "--n", "512", "--seed", "1", "--out", str(tmp_path)]) == 0
    header, rows = assert_well_formed(tmp_path / "goe.csv")
    assert header == ["idx", "eigenvalue"] and len(rows) == 512
    m = RunManifest.read(tmp_path / "manifest.txt")
    assert float(m.extra["ks_statistic"]) <= 0.05
    assert m.outputs == ["goe.csv"]


def test_glass_descend_rows(tmp_path):
    assert main(["glass", "descend", "--n", "64", "--p", "3", "--steps", "5000", "--lr", "1e-3", "--seed", "1", "--out", str(tmp_path)]) == 0
    header, rows = assert_well_formed(tmp_path / "descent.csv")
    assert header == ["step", "eps", "grad_norm"]
    assert len(rows) == 5000
    assert float(rows[-1][1]) < float(rows[0][1])


def test_glass_enumerate_reports_gap(tmp_path):
    assert main(["glass", "enumerate", "--n", "10", "--beta", "1", "50", "--seed", "1", "--out", str(tmp_path)]) == 0
    header, rows = assert_well_formed(tmp_path / "enumerate.csv")
    assert header == ["beta", "log_z", "free_energy", "ground_energy_per_site"]
    F, ground = float(rows[1][2]), float(rows[1][3])
    # doubly degenerate ground state: the gap is ln 2 / (n beta) plus excited-state corrections
    assert F + ground == pytest.approx(math.log(2) / 500, abs=1e-6)


def test_glass_covcheck_and_sample(tmp_path):
    assert main(["glass", "covcheck", "--n", "8", "--p", "3", "--samples", "1000", "--out", str(tmp_path / "c")]) == 0
    header, rows = assert_well_formed(tmp_path / "c" / "covcheck.csv")
    assert header == ["overlap", "empirical", "theory", "z"] and len(rows) == 5
    assert main(["glass", "sample", "--n", "3", "--p", "2", "--out", str(tmp_path / "s")]) == 0
    _, rows = assert_well_formed(tmp_path / "s" / "couplings.csv")
    assert len(rows) == 9


def test_glass_indexscan(tmp_path):
    assert main(["glass", "indexscan", "--n", "32", "--points", "3", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "indexscan.csv")
    assert header[:3] == ["point", "eps", "alpha_hat"] and len(rows) == 3


def test_glass_resource_bounds_exit_3(tmp_path, capsys):
    assert main(["glass", "enumerate", "--n", "30", "--out", str(tmp_path)]) == 3
    assert "bound" in capsys.readouterr().err
    assert main(["glass", "sample", "--n", "200", "--p", "4", "--out", str(tmp_path)]) == 3


# --------------------------------------------------------------------------- train


def train_args(out, *extra):
    return ["train", "--algo", "cosine", "--lambda0", "1e-3", "--T", "8", "--epochs", "8", "--samples", "32", "--out", str(out), *extra]


def test_train_cosine_lambda_column(tmp_path):
    assert main(train_args(tmp_path)) == 0
    header, rows = assert_well_formed(tmp_path / "train.csv")
    assert header == ["epoch", "loss", "lambda", "trace_estimate", "grad_norm"]
    assert [float(r[2]) for r in rows] == [1e-3 * (1 + math.cos(2 * math.pi * i / 8)) for i in range(8)]


def test_train_is_byte_identical(tmp_path):
    assert main(train_args(tmp_path / "a")) == 0
    assert main(train_args(tmp_path / "b")) == 0
    assert (tmp_path / "a" / "train.csv").read_bytes() == (tmp_path / "b" / "train.csv").read_bytes()


def test_train_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# cosine run\nalgo = cosine\nlambda0=1e-3\nT=4\nepochs=6\nsamples=32\n", encoding="utf-8")
    assert main(["train", "--config", str(cfg), "--epochs", "3", "--out", str(tmp_path / "o")]) == 0
    _, rows = read_csv(tmp_path / "o" / "train.csv")
    assert len(rows) == 3
    assert float(rows[0][2]) == 2e-3


def test_train_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("learning_rate=0.1\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert main(["train", "--lr", "0", "--out", str(tmp_path)]) == 2


def test_train_matched_nonpositive_loss_exits_4(tmp_path, capsys):
    out = tmp_path / "m"
    code = main(["train", "--target", "glass", "--algo", "matched", "--loss-shift", "0", "--glass-n", "16",
                 "--lr", "0.05", "--epochs", "50", "--trace-probes", "0", "--out", str(out)])
    assert code == 4
    assert "positive loss" in capsys.readouterr().err
    header, _ = read_csv(out / "train.csv")
    assert header[0] == "epoch"
    assert RunManifest.read(out / "manifest.txt").extra["status"] == "NonpositiveLossError"


def test_train_svg_and_glass_index(tmp_path):
    args = ["train", "--target", "glass", "--glass-n", "16", "--algo", "matched", "--epochs", "20",
            "--index-every", "10", "--svg", "--trace-probes", "0", "--out", str(tmp_path)]
    assert main(args) == 0
    for name in ("loss.svg", "lambda.svg", "glass_index.csv"):
        assert (tmp_path / name).exists()
    assert (tmp_path / "loss.svg").read_text().count("<path") == 1


# --------------------------------------------------------------------------- plot


def test_plot_one_path_per_series_and_vline(tmp_path):
    main(["theory", "--table", "index-vs-energy", "--points", "41", "--out", str(tmp_path)])
    svg = tmp_path / "fig.svg"
    assert main(["plot", str(tmp_path / "index_vs_energy.csv"), "--out", str(svg), "--vline", "-2.04124"]) == 0
    text = svg.read_text()
    assert text.count("<path") == 2
    assert 'class="vline" data-x="-2.04124"' in text
    assert 'stroke-dasharray="6,4"' in text
    assert main(["plot", str(tmp_path / "index_vs_energy.csv"), "--y", "alpha", "--out", str(svg)]) == 0
    assert svg.read_text().count("<path") == 1


def test_plot_bad_inputs_exit_2(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", str(empty), "--out", str(tmp_path / "x.svg")]) == 2
    header_only = tmp_path / "h.csv"
    header_only.write_text("a,b\n")
    assert main(["plot", str(header_only), "--out", str(tmp_path / "x.svg")]) == 2
    ragged = tmp_path / "r.csv"
    ragged.write_text("a,b\n1,2\n3\n")
    assert main(["plot", str(ragged), "--out", str(tmp_path / "x.svg")]) == 2
    good = tmp_path / "g.csv"
    good.write_text("a,b\n1,2\n3,4\n")
    assert main(["plot", str(good), "--y", "c", "--out", str(tmp_path / "x.svg")]) == 2
    assert main(["plot", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x.svg")]) == 2


# --------------------------------------------------------------------------- replay


@pytest.mark.parametrize(
    "command, csv_name",
    [
        (["theory", "--table", "all", "--points", "11"], "complexity.csv"),
        (["glass", "descend", "--n", "16", "--steps", "50", "--seed", "4"], "descent.csv"),
        (["train", "--algo", "matched", "--epochs", "12", "--samples", "32", "--trace-probes", "2"], "train.csv"),
    ],
)
def test_replay_is_byte_identical(tmp_path, command, csv_name):
    first = tmp_path / "first"
    assert main([*command, "--out", str(first)]) == 0
    m = RunManifest.read(first / "manifest.txt")
    assert csv_name in m.outputs
    assert main(["replay", str(first / "manifest.txt"), "--out", str(tmp_path / "again")]) == 0
    for name in m.outputs:
        assert (first / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_replay_of_config_file_run_needs_no_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("algo=two-step\nschedule=cosine\nT=3\nepochs=7\nsamples=16\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    cfg.unlink()
    assert main(["replay", str(tmp_path / "a" / "manifest.txt"), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "train.csv").read_bytes() == (tmp_path / "b" / "train.csv").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "glassanneal", "theory", "--constants", "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "eps_c=" in proc.stdout


@pytest.mark.parametrize("fixture", ["descent_n64_p3_seed1.csv", "mlp_teacher_student_seed0.csv"])
def test_regression_fixtures_byte_identical(tmp_path, fixture):
    args, produced = FIXTURES[fixture]
    out = produce(args, produced, tmp_path)
    assert out.read_bytes() == (Path(__file__).parent / "fixtures" / fixture).read_bytes()


def test_glass_goe_seed_average(tmp_path):
    assert main(["glass", "goe", "--n", "128", "--seeds", "4", "--out", str(tmp_path)]) == 0
    m = RunManifest.read(tmp_path / "manifest.txt")
    assert m.seeds == [0, 1, 2, 3]
    assert 0 < float(m.extra["ks_mean"]) <= 0.1
    assert float(m.extra["ks_stderr"]) > 0
    assert main(["glass", "goe", "--seeds", "0", "--out", str(tmp_path)]) == 2
