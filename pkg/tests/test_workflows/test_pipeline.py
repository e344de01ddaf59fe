"""
端到端流程测试
"""
import numpy as np
import pytest

from sparse_btl.errors import ConfigError, GraphError
from sparse_btl.models import BootstrapSpec, ComparisonDataset, DataSource, FitConfig
from sparse_btl.services.dataset_io import write_dataset
from sparse_btl.services.report_io import write_report
from sparse_btl.workflows.pipeline import (
    load_fit,
    prepare_dataset,
    run_debias,
    run_fit,
    run_gof,
    run_lambda_path,
    run_rank_ci,
    run_topk,
)


@pytest.fixture
def source(tmp_path, dataset):
    write_dataset(dataset, tmp_path / "covariates.csv", tmp_path / "comparisons.csv")
    return DataSource(covariates=tmp_path / "covariates.csv", comparisons=tmp_path / "comparisons.csv")


@pytest.fixture
def fit_file(tmp_path, source):
    result, index_map = run_fit(source, FitConfig(lambda_=1.0, tau=0.0))
    assert index_map is None
    return write_report(result, tmp_path / "fit.json")


@pytest.fixture
def spec():
    return BootstrapSpec(B=30, seed=2)


class TestPrepareDataset:
    """测试连通性处理"""

    def _disconnected(self, tmp_path, restrict):
        ds = ComparisonDataset.from_arrays(
            np.zeros((5, 0)), [[1, 0], [3, 2], [4, 3]], [1, 2, 3], [4, 5, 6]
        )
        write_dataset(ds, tmp_path / "c.csv", tmp_path / "p.csv")
        return DataSource(covariates=tmp_path / "c.csv", comparisons=tmp_path / "p.csv", restrict_lcc=restrict)

    def test_disconnected_rejected(self, tmp_path):
        with pytest.raises(GraphError, match="restrict-lcc"):
            prepare_dataset(self._disconnected(tmp_path, False))

    def test_restrict_largest_component(self, tmp_path):
        dataset, index_map = prepare_dataset(self._disconnected(tmp_path, True))
        assert dataset.n == 3
        assert index_map == {2: 0, 3: 1, 4: 2}


class TestPipeline:
    """测试 fit.json 驱动的后续步骤"""

    def test_fit_records_source(self, fit_file, source, dataset, fitted):
        """测试重新加载的拟合结果与直接拟合一致"""
        result, reloaded = load_fit(fit_file)
        assert result.source == source
        np.testing.assert_array_equal(reloaded.wins, dataset.wins)
        np.testing.assert_allclose(result.params.theta_tilde, fitted.params.theta_tilde, atol=1e-12)

    def test_fit_without_source(self, tmp_path, fitted):
        path = write_report(fitted, tmp_path / "bare.json")
        with pytest.raises(ConfigError, match="data source"):
            load_fit(path)

    def test_debias(self, fit_file, fitted):
        report = run_debias(fit_file)
        assert report.command == "debias"
        assert report.lambda_ == 1.0
        assert report.support == fitted.support
        assert report.debiased.alpha_debiased.shape == (30,)

    def test_gof(self, fit_file, spec):
        report = run_gof(fit_file, spec)
        assert report.gof.B == 30
        assert report.seed == 2
        assert report.sampler == "collapsed"

    def test_rank_ci_two_stage(self, fit_file, spec):
        report = run_rank_ci(fit_file, spec, items=[0, 1], two_stage=True)
        assert report.stage == "two_stage"
        assert report.debiased is None
        assert [iv.item for iv in report.rank_ci.intervals] == [0, 1]

    def test_rank_ci_new_items(self, tmp_path, fit_file, spec, dataset):
        """测试借用训练物品的样本外区间"""
        path = tmp_path / "new.csv"
        rows = "\n".join(
            f"{t},{donor},{float(dataset.covariates[donor, 0])!r},{float(dataset.covariates[donor, 1])!r}"
            for t, donor in enumerate([4, 9, 11])
        )
        path.write_text("item_id,donor,x1,x2\n" + rows + "\n")
        report = run_rank_ci(fit_file, spec, new_items=path)
        assert len(report.rank_ci.intervals) == 3
        assert all(1 <= iv.lower <= iv.upper <= 3 for iv in report.rank_ci.intervals)

    def test_one_sided(self, fit_file, spec):
        report = run_rank_ci(fit_file, spec, items=[3], one_sided=True)
        assert report.rank_ci.kind == "one_sided_rank"
        assert report.rank_ci.intervals[0].upper == 30

    def test_topk_and_threshold(self, fit_file, spec):
        selection = run_topk(fit_file, 5, spec).topk
        assert selection.selected == [m for m, lb in enumerate(selection.lower_bounds) if lb <= 5]
        decision = run_topk(fit_file, 5, spec, item=2).threshold
        assert decision.lower_bound >= selection.lower_bounds[2]
        assert decision.reject == (decision.lower_bound > 5)

    def test_lambda_path(self, source, spec):
        table = run_lambda_path(source, [1e6, 1.0], FitConfig(tau=0.0), spec)
        assert table["lambda"].tolist() == [1e6, 1.0]
        assert table.loc[0, "support_size"] == 0
        assert table["p_value"].between(0, 1).all()
