import json

import numpy as np
import pytest

from sgm_schedules import storage
from sgm_schedules.analysis.preprocess import PreprocessTransform
from sgm_schedules.app.cli import main
from sgm_schedules.app.session import protocol_checks, run_experiment
from sgm_schedules.errors import ConfigError
from sgm_schedules.models import SampleBatch
from sgm_schedules.score.network import zero_params

REDUCED_PROTOCOL = """\
target.kind = iso
target.dim = 5
target.n-train = 1000
grid.steps = 100
train.epochs = 2
train.lr = 0.001
train.width = 16
experiment.score = trained
experiment.scheme = ei
experiment.n-mc = 50
experiment.n-samples = 1000
experiment.runs = 2
experiment.metrics = gauss-kl
sweep.a-min = 0
sweep.a-max = 4
sweep.a-step = 2
sweep.refine-step = 0
output.dir = res
"""

SMALL_RUN = """\
target.kind = iso
target.dim = 3
grid.steps = 50
experiment.bound = kl
experiment.score = exact
experiment.scheme = ei
experiment.n-samples = 300
experiment.runs = 2
experiment.metrics = gauss-kl
sweep.a-min = -1
sweep.a-max = 1
sweep.a-step = 1
sweep.refine-step = 0.5
sweep.refine-radius = 0.5
output.dir = res
output.plot = sweep.svg
"""


def _write_csv(path, rows):
    storage.write_table(path, rows, list(rows[0]))


# ---------- bound ----------

def test_bound_kl_iso50(tmp_path):
    out = tmp_path / "kl.json"
    assert main(["bound", "--dim", "50", "--steps", "500", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["e3"] == pytest.approx(6.0, rel=1e-12)
    assert report["e2"] == 0.0
    assert report["novikov_assumed"] is True


def test_bound_w2_rescaled(tmp_path):
    out = tmp_path / "w2.json"
    args = ["bound", "--metric", "w2", "--target", "corr", "--dim", "5", "--preprocess", "rescale",
            "--n-train", "5000", "--out", str(out)]
    assert main(args) == 0
    report = json.loads(out.read_text())
    assert report["total_original_scale"] >= report["total"] > 0
    assert set(report["rate_constants"]) == {"c1", "c2"}


def test_bound_w2_without_log_concavity_exits_3():
    assert main(["bound", "--metric", "w2", "--target", "corr", "--dim", "5"]) == 3


def test_bad_flag_value_exits_2():
    assert main(["bound", "--dim", "0"]) == 2
    assert main(["bound", "--score", "net:/no/such/file.bin"]) == 2


def test_argparse_error_exits():
    with pytest.raises(SystemExit) as exc:
        main(["bound", "--metric", "tv"])
    assert exc.value.code == 2


# ---------- generate / metrics / train ----------

def test_generate_then_metrics(tmp_path):
    samples = tmp_path / "x.bin"
    assert main(["generate", "--dim", "3", "--steps", "100", "--n", "2000", "--out", str(samples)]) == 0
    assert storage.read_samples(samples).data.shape == (2000, 3)

    out = tmp_path / "kl.json"
    assert main(["metrics", "--metric", "gauss-kl", "--samples", str(samples), "--dim", "3", "--out", str(out)]) == 0
    assert 0.0 <= json.loads(out.read_text())["value"] < 0.1

    out = tmp_path / "sw.json"
    args = ["metrics", "--metric", "sliced-w2", "--samples", str(samples), "--dim", "3",
            "--projections", "50", "--out", str(out)]
    assert main(args) == 0
    assert json.loads(out.read_text())["params"] == {"projections": 50}


def test_metrics_need_a_target(tmp_path):
    samples = tmp_path / "x.bin"
    storage.write_samples(samples, SampleBatch(np.zeros((5, 2)) + np.arange(5)[:, None], seed=0))
    assert main(["metrics", "--metric", "nll", "--samples", str(samples)]) == 2
    assert main(["metrics", "--metric", "gauss-kl", "--samples", str(samples), "--dim", "3"]) == 2


def test_train_writes_params_and_transform(tmp_path):
    params = tmp_path / "net.bin"
    args = ["train", "--dim", "2", "--epochs", "1", "--width", "8", "--n-train", "200",
            "--preprocess", "rescale", "--out", str(params)]
    assert main(args) == 0
    loaded = storage.load_params(params)
    assert (loaded.d, loaded.width) == (2, 8)
    assert (tmp_path / "net.transform.json").exists()


def test_generate_with_network_and_transform(tmp_path):
    params = tmp_path / "zero.bin"
    storage.save_params(params, zero_params(2, width=4))
    transform = tmp_path / "t.json"
    PreprocessTransform(mu=np.array([1.0, 1.0]), d_scale=np.array([1.0, 2.0]), kappa=0.5).save(transform)

    samples = tmp_path / "x.bin"
    args = ["generate", "--dim", "2", "--steps", "20", "--n", "100", "--score", f"net:{params}",
            "--transform", str(transform), "--out", str(samples)]
    assert main(args) == 0
    assert storage.read_samples(samples).data.shape == (100, 2)
    assert main(args[:-2] + ["--dim", "3", "--out", str(samples)]) == 2


# ---------- plot ----------

def test_plot_polylines(tmp_path):
    csv = tmp_path / "s.csv"
    _write_csv(csv, [{"a": 0.0, "bound_total": 1.0, "emp_mean": 0.5}, {"a": 1.0, "bound_total": 2.0, "emp_mean": 0.7}])
    svg = tmp_path / "s.svg"
    assert main(["plot", "--csv", str(csv), "--y", "bound_total,emp_mean", "--out", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 2
    assert main(["plot", "--csv", str(csv), "--y", "bound_total", "--log", "--out", str(svg)]) == 0


def test_plot_errors_exit_2(tmp_path):
    csv = tmp_path / "s.csv"
    _write_csv(csv, [{"a": 0.0, "bound_total": 0.0}, {"a": 1.0, "bound_total": 2.0}])
    svg = tmp_path / "s.svg"
    assert main(["plot", "--csv", str(csv), "--log", "--out", str(svg)]) == 2
    assert main(["plot", "--csv", str(csv), "--y", "emp_mean", "--out", str(svg)]) == 2
    assert main(["plot", "--csv", str(tmp_path / "none.csv"), "--out", str(svg)]) == 2


# ---------- run ----------

def test_run_is_reproducible_across_worker_counts(tmp_path, monkeypatch):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_RUN)

    monkeypatch.setenv("SGM_THREADS", "1")
    first = run_experiment(path, tmp_path / "one")
    monkeypatch.setenv("SGM_THREADS", "4")
    second = run_experiment(path, tmp_path / "four")

    assert first["csv"].read_bytes() == second["csv"].read_bytes()
    assert first["report"].read_bytes() == second["report"].read_bytes()
    assert first["plot"].exists()

    report = json.loads(first["report"].read_text())
    assert report["a_star"] == first["sweep"].a_star == -1.5
    assert [t["stage"] for t in report["trace"]] == ["coarse", "refine"]
    assert [r["schedule"] for r in report["comparison"]["gauss-kl"]] == ["linear", "cosine", "parametric(a=-1.5)"]
    assert (tmp_path / "one" / "res" / "comparison-gauss-kl.csv").exists()
    frame = storage.read_table(first["csv"])
    assert (frame["bound_total_original"] == frame["bound_total"]).all()


def test_run_command(tmp_path, capsys):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_RUN.replace("experiment.metrics = gauss-kl\n", ""))
    assert main(["run", str(path), "--out-dir", str(tmp_path / "out")]) == 0
    printed = capsys.readouterr().out
    assert "--- SWEEP ---" in printed
    assert "a_star = -1.5" in printed
    assert (tmp_path / "out" / "res" / "sweep.csv").exists()


def test_run_missing_config_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2


# ---------- protocol checks ----------

def _comparison(linear, tuned, a_star=1.75):
    return {
        "gauss-kl": [
            {"schedule": "linear", "mean": linear[0], "std": linear[1]},
            {"schedule": "cosine", "mean": 9.0, "std": None},
            {"schedule": f"parametric(a={a_star:g})", "mean": tuned[0], "std": tuned[1]},
        ]
    }


def test_protocol_checks_pass():
    checks = protocol_checks(1.75, _comparison((0.10, 0.01), (0.09, 0.01)))
    assert checks["passed"]
    assert checks["pooled_std"] == pytest.approx(0.01)


def test_protocol_checks_non_inferiority_uses_pooled_std():
    assert protocol_checks(1.75, _comparison((0.10, 0.03), (0.12, 0.01)))["non_inferior"]
    checks = protocol_checks(1.75, _comparison((0.10, None), (0.12, None)))
    assert not checks["non_inferior"]
    assert not checks["passed"]


def test_protocol_checks_bracket():
    checks = protocol_checks(-3.0, _comparison((0.10, 0.01), (0.09, 0.01), a_star=-3.0))
    assert not checks["a_star_in_bracket"]
    assert not checks["passed"]
    assert protocol_checks(None, _comparison((0.1, 0.0), (0.1, 0.0)))["a_star_in_bracket"] is False


def test_protocol_checks_need_a_comparison():
    with pytest.raises(ConfigError):
        protocol_checks(1.0, {})
    with pytest.raises(ConfigError):
        protocol_checks(1.0, _comparison((0.1, 0.0), (0.1, 0.0)), metric="sliced-w2")


@pytest.mark.slow
def test_reduced_protocol_runs_end_to_end(tmp_path):
    path = tmp_path / "protocol.cfg"
    path.write_text(REDUCED_PROTOCOL)
    result = run_experiment(path)

    assert result["sweep"].a_star in (0.0, 2.0, 4.0)
    names = [r["schedule"] for r in result["comparison"]["gauss-kl"]]
    assert names[:2] == ["linear", "cosine"] and names[2].startswith("parametric(")
    checks = protocol_checks(result["sweep"].a_star, result["comparison"])
    assert checks["a_star_in_bracket"] == (0.0 <= checks["a_star"] <= 5.0)
    assert isinstance(checks["non_inferior"], bool)
