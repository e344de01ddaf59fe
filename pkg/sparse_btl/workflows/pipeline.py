"""
端到端流程

把数据加载、连通性处理、拟合与各类推断串成 CLI 子命令使用的步骤。
fit.json 记录数据来源，后续的 debias / gof / rank-ci / topk 据此重新加载同一数据集。
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from sparse_btl.errors import ConfigError, GraphError
from sparse_btl.models.dataset import ComparisonDataset
from sparse_btl.models.fit import FitConfig, FitResult
from sparse_btl.models.inference import BootstrapSpec, InferenceReport
from sparse_btl.models.run_config import DataSource
from sparse_btl.services.bootstrap import gof_test
from sparse_btl.services.dataset_io import load_dataset, load_new_items, summarize_dataset
from sparse_btl.services.debias import debias_alpha
from sparse_btl.services.graph import largest_component_restrict
from sparse_btl.services.ranking import one_sided_rank, rank_ci, rank_threshold_test, topk_screen
from sparse_btl.services.refit import two_stage_refit
from sparse_btl.services.report_io import read_report
from sparse_btl.services.solver import fit, fit_path

logger = logging.getLogger(__name__)


def prepare_dataset(source: DataSource) -> Tuple[ComparisonDataset, Optional[Dict[int, int]]]:
    """
    加载数据集并处理连通性

    Returns:
        (数据集, 重新编号映射；未重新编号时为 None)

    Raises:
        GraphError: 图不连通且未允许限制到最大连通分量
    """
    dataset = load_dataset(source.covariates, source.comparisons)
    summary = summarize_dataset(dataset)
    if summary.connected:
        return dataset, None
    if not source.restrict_lcc:
        raise GraphError(
            f"comparison graph has {summary.num_components} components; "
            "pass --restrict-lcc to keep the largest one"
        )
    restricted, index_map = largest_component_restrict(dataset)
    return restricted, index_map


def run_fit(source: DataSource, config: FitConfig) -> Tuple[FitResult, Optional[Dict[int, int]]]:
    """拟合并把数据来源写入结果"""
    dataset, index_map = prepare_dataset(source)
    result = fit(dataset, config)
    return result.model_copy(update={"source": source}), index_map


def load_fit(path: Path) -> Tuple[FitResult, ComparisonDataset]:
    """读取 fit.json 并重新加载其数据集"""
    result = read_report(path, FitResult)
    if result.source is None:
        raise ConfigError(f"{path} does not record its data source; refit with the fit subcommand")
    dataset, _ = prepare_dataset(result.source)
    if dataset.n != result.params.n or dataset.d != result.params.d:
        raise ConfigError(f"{path} does not match its data source (dimensions differ)")
    return result, dataset


def _report(command: str, result: FitResult, spec: Optional[BootstrapSpec] = None, **fields) -> InferenceReport:
    echo = {}
    if spec is not None:
        echo = {"seed": spec.seed, "B": spec.B, "alpha_level": spec.alpha_level, "sampler": spec.sampler}
    return InferenceReport(
        command=command, lambda_=result.lambda_, tau=result.tau, support=result.support, **echo, **fields
    )


def run_debias(fit_file: Path) -> InferenceReport:
    result, dataset = load_fit(fit_file)
    return _report("debias", result, debiased=debias_alpha(result, dataset))


def run_gof(fit_file: Path, spec: BootstrapSpec) -> InferenceReport:
    result, dataset = load_fit(fit_file)
    debiased = debias_alpha(result, dataset)
    gof = gof_test(result, dataset, spec, debiased=debiased)
    return _report("gof", result, spec, debiased=debiased, gof=gof)


def _new_items(new_items: Optional[Path], dataset: ComparisonDataset):
    if new_items is None:
        return None, None
    return load_new_items(new_items, dataset.d, dataset.covariate_scale)


def run_rank_ci(
    fit_file: Path,
    spec: BootstrapSpec,
    items: Optional[Sequence[int]] = None,
    new_items: Optional[Path] = None,
    two_stage: bool = False,
    one_sided: bool = False,
) -> InferenceReport:
    """双侧（或单侧）排名置信区间"""
    result, dataset = load_fit(fit_file)
    Z, donors = _new_items(new_items, dataset)
    debiased = None if two_stage else debias_alpha(result, dataset)
    refit = two_stage_refit(dataset, result.support) if two_stage else None
    if one_sided:
        ranks = one_sided_rank(
            result, debiased, dataset, new_covariates=Z, items=items, spec=spec,
            donors=donors, two_stage=two_stage, refit=refit,
        )
    else:
        ranks = rank_ci(
            result, debiased, dataset, new_covariates=Z, items=items, spec=spec,
            donors=donors, two_stage=two_stage, refit=refit,
        )
    return _report("rank-ci", result, spec, stage=ranks.stage, debiased=debiased, rank_ci=ranks)


def run_topk(
    fit_file: Path,
    K: int,
    spec: BootstrapSpec,
    item: Optional[int] = None,
    new_items: Optional[Path] = None,
    two_stage: bool = False,
) -> InferenceReport:
    """前 K 筛选；给定 item 时改为检验 H₀: r(item) ≤ K"""
    result, dataset = load_fit(fit_file)
    Z, donors = _new_items(new_items, dataset)
    debiased = None if two_stage else debias_alpha(result, dataset)
    extra = dict(new_covariates=Z, donors=donors, two_stage=two_stage)
    stage = "two_stage" if two_stage else "one_stage"
    if item is not None:
        decision = rank_threshold_test(item, K, result, debiased, dataset, spec, **extra)
        return _report("topk", result, spec, stage=stage, threshold=decision)
    selection = topk_screen(K, result, debiased, dataset, spec, **extra)
    return _report("topk", result, spec, stage=stage, topk=selection)


def run_lambda_path(
    source: DataSource, lambdas: List[float], config: FitConfig, spec: BootstrapSpec
) -> pd.DataFrame:
    """
    λ 网格：每个 λ 报告支撑集大小、𝒯₁、c_{1,1−α} 与 p 值

    Returns:
        每个 λ 一行的数据表
    """
    dataset, _ = prepare_dataset(source)
    rows = []
    for result in fit_path(dataset, lambdas, config):
        gof = gof_test(result, dataset, spec)
        rows.append(
            {
                "lambda": result.lambda_,
                "tau": result.tau,
                "support_size": len(result.support),
                "converged": result.converged,
                "T1": gof.statistic,
                "c": gof.critical_value,
                "p_value": gof.p_value,
                "reject": gof.reject,
            }
        )
    return pd.DataFrame(rows)
