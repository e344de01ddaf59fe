"""
命令行程序测试

直接调用 main(argv)，检查退出码与写出的文件。
"""
import json

import pandas as pd
import pytest

from cli.main import main


@pytest.fixture
def workdir(tmp_path):
    """模拟数据并拟合，返回包含 fit.json 的目录"""
    code = main(
        ["simulate", "--preset", "table1", "--n", "30", "--d", "2", "--k", "3", "--p", "0.6",
         "--L", "20", "--seed", "3", "--out-dir", str(tmp_path)]
    )
    assert code == 0
    code = main(
        ["fit", "--covariates", str(tmp_path / "covariates.csv"), "--comparisons", str(tmp_path / "comparisons.csv"),
         "--lambda", "1.0", "--tau", "0", "--out", str(tmp_path / "fit.json")]
    )
    assert code == 0
    return tmp_path


def _json(path):
    return json.loads(path.read_text())


class TestCommands:
    """测试各子命令的正常路径"""

    def test_simulate_outputs(self, workdir):
        assert (workdir / "covariates.csv").is_file()
        truth = _json(workdir / "truth.json")
        assert truth["support"] == [0, 1, 2]

    def test_fit_report(self, workdir):
        report = _json(workdir / "fit.json")
        assert report["lambda"] == 1.0
        assert report["converged"] is True
        assert report["schema_version"] == 1
        assert report["source"]["covariates"].endswith("covariates.csv")

    def test_gof(self, workdir, capsys):
        out = workdir / "gof.json"
        assert main(["gof", "--fit", str(workdir / "fit.json"), "--B", "30", "--seed", "1", "--out", str(out)]) == 0
        report = _json(out)
        assert report["command"] == "gof"
        assert report["B"] == 30
        assert set(report["gof"]) >= {"statistic", "critical_value", "p_value", "reject"}
        assert "goodness of fit" in capsys.readouterr().out

    def test_debias(self, workdir):
        out = workdir / "debias.json"
        assert main(["debias", "--fit", str(workdir / "fit.json"), "--out", str(out)]) == 0
        assert len(_json(out)["debiased"]["alpha_debiased"]) == 30

    def test_rank_ci(self, workdir):
        out = workdir / "rank.json"
        code = main(
            ["rank-ci", "--fit", str(workdir / "fit.json"), "--items", "0,1", "--B", "30", "--two-stage",
             "--out", str(out)]
        )
        assert code == 0
        report = _json(out)
        assert report["stage"] == "two_stage"
        assert [iv["item"] for iv in report["rank_ci"]["intervals"]] == [0, 1]

    def test_topk(self, workdir):
        out = workdir / "topk.json"
        assert main(["topk", "--fit", str(workdir / "fit.json"), "--K", "3", "--B", "30", "--out", str(out)]) == 0
        assert _json(out)["topk"]["K"] == 3
        assert main(
            ["topk", "--fit", str(workdir / "fit.json"), "--K", "3", "--item", "0", "--B", "30", "--out", str(out)]
        ) == 0
        assert _json(out)["threshold"]["item"] == 0

    def test_lambda_path(self, workdir):
        out = workdir / "path.csv"
        code = main(
            ["lambda-path", "--lambdas", "1e6,1.0", "--covariates", str(workdir / "covariates.csv"),
             "--comparisons", str(workdir / "comparisons.csv"), "--tau", "0", "--B", "20", "--out", str(out)]
        )
        assert code == 0
        assert pd.read_csv(out)["support_size"].tolist()[0] == 0

    def test_config_file(self, workdir):
        """测试 --config 提供数据路径与 λ"""
        conf = workdir / "run.conf"
        conf.write_text(
            f"covariates={workdir / 'covariates.csv'}\ncomparisons={workdir / 'comparisons.csv'}\nlambda=2.0\ntau=0\n"
        )
        out = workdir / "fit2.json"
        assert main(["--config", str(conf), "fit", "--out", str(out)]) == 0
        assert _json(out)["lambda"] == 2.0

    def test_bench_support(self, tmp_path):
        code = main(["bench-support", "--preset", "table1", "--reps", "1", "--threads", "1", "--out-dir", str(tmp_path)])
        assert code == 0
        assert len(pd.read_csv(tmp_path / "support.csv")) == 1
        assert _json(tmp_path / "summary.json")["experiment"] == "support"

    def test_bench_support_defaults_to_table1(self, tmp_path):
        """测试未给 --preset 时支撑集实验使用 table1 场景"""
        code = main(["bench-support", "--reps", "1", "--threads", "1", "--out-dir", str(tmp_path)])
        assert code == 0
        summary = _json(tmp_path / "summary.json")
        assert summary["preset"]["name"] == "table1"
        assert summary["preset"]["n"] == 100

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "rank-ci" in capsys.readouterr().out


class TestExitCodes:
    """测试错误到退出码的映射"""

    def test_missing_file(self, tmp_path, capsys):
        code = main(["fit", "--covariates", str(tmp_path / "a.csv"), "--comparisons", str(tmp_path / "b.csv")])
        assert code == 1
        assert "file not found" in capsys.readouterr().err

    def test_unknown_preset(self, tmp_path):
        assert main(["simulate", "--preset", "nope", "--out-dir", str(tmp_path)]) == 1

    def test_missing_data_paths(self):
        assert main(["fit"]) == 1

    def test_invalid_sampler(self, workdir):
        assert main(["gof", "--fit", str(workdir / "fit.json"), "--sampler", "exact"]) == 1

    def test_bad_config_key(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("bogus=1\n")
        assert main(["--config", str(conf), "fit"]) == 1

    def test_solver_failure(self, workdir, capsys):
        """测试发散的求解返回 2"""
        code = main(
            ["fit", "--covariates", str(workdir / "covariates.csv"), "--comparisons", str(workdir / "comparisons.csv"),
             "--lambda", "0.1", "--tau", "1", "--eta", "1000", "--no-backtracking", "--out", str(workdir / "x.json")]
        )
        assert code == 2
        assert "SolverError" in capsys.readouterr().err
