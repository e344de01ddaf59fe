"""
蒙特卡洛实验驱动

每个重复由 (场景种子, 重复序号) 独立派生随机流，joblib 并行执行，结果按序号排列。
输出整洁数据表（每个重复/条件一行）与汇总字典：
    normality.csv  rep, rv1, rv2
    power.csv      rho, rep, T1, c, reject
    coverage.csv   item, rep, cover_theta, cover_rank, length, stage
    support.csv    rep, exact, subset, support_size
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from sparse_btl.errors import InvalidInputError
from sparse_btl.models.fit import FitConfig
from sparse_btl.models.inference import BootstrapSpec
from sparse_btl.models.scenario import Scenario, ScenarioTruth
from sparse_btl.services.bootstrap import gof_test
from sparse_btl.services.debias import beta_block_inverse, debias_alpha
from sparse_btl.services.ranking import rank_ci
from sparse_btl.services.refit import two_stage_refit
from sparse_btl.services.solver import fit
from sparse_btl.workflows.simulation import generate_truth, simulate_dataset

logger = logging.getLogger(__name__)


class ExperimentPreset(BaseModel):
    """一组实验参数"""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: str
    n: int
    d: int
    k: int
    p: float
    L: int
    lambda_: float = Field(..., alias="lambda")
    tau: float = 0.0
    B: int = 200
    reps: int = 100
    alpha_level: float = 0.05
    rhos: List[float] = Field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    items: List[int] = Field(default_factory=list)

    def scenario(self, seed: int, **overrides: Any) -> Scenario:
        fields = dict(n=self.n, d=self.d, k=self.k, p=self.p, L=self.L, seed=seed)
        fields.update(overrides)
        return Scenario(**fields)


PRESETS: Dict[str, ExperimentPreset] = {
    "fig1": ExperimentPreset(name="fig1", n=200, d=3, k=5, p=0.5, L=25, lambda_=3.0, reps=500),
    "fig1_sparse": ExperimentPreset(name="fig1_sparse", n=200, d=3, k=5, p=0.1, L=10, lambda_=1.2, reps=500),
    "fig1_low_lambda": ExperimentPreset(
        name="fig1_low_lambda", n=200, d=3, k=5, p=0.5, L=25, lambda_=1.0, reps=500
    ),
    "fig1_sparse_low_lambda": ExperimentPreset(
        name="fig1_sparse_low_lambda", n=200, d=3, k=5, p=0.1, L=10, lambda_=0.4, reps=500
    ),
    "fig3": ExperimentPreset(name="fig3", n=200, d=3, k=5, p=0.5, L=160, lambda_=0.5, B=200, reps=100),
    "fast": ExperimentPreset(
        name="fast", n=200, d=3, k=5, p=0.5, L=160, lambda_=0.5, B=100, reps=50, rhos=[0.0, 5.0]
    ),
    "table1": ExperimentPreset(
        name="table1", n=100, d=3, k=5, p=0.5, L=160, lambda_=1.0, B=200, reps=100, items=[0, 1, 2, 5, 6, 7]
    ),
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError as exc:
        raise InvalidInputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from exc


@dataclass
class ExperimentOutput:
    """实验结果：CSV 文件名、整洁数据表与汇总"""

    filename: str
    rows: pd.DataFrame
    summary: Dict[str, Any]


def replicate_seed(seed: int, replicate: int) -> int:
    """由 (种子, 重复序号) 派生自助法种子"""
    return int(np.random.SeedSequence([seed, replicate]).generate_state(1)[0])


def _run(func, reps: int, threads: Optional[int], *args) -> List[Any]:
    if reps < 1:
        raise InvalidInputError("replicate count must be at least 1")
    n_jobs = threads if threads is not None else -1
    return Parallel(n_jobs=n_jobs)(delayed(func)(*args, rep) for rep in range(reps))


def _fit_config(preset: ExperimentPreset) -> FitConfig:
    return FitConfig(lambda_=preset.lambda_, tau=preset.tau)


# ---- 渐近正态性 ----

def _normality_rep(scenario: Scenario, truth: ScenarioTruth, preset: ExperimentPreset, item: int, rep: int) -> Dict:
    dataset = simulate_dataset(scenario, truth, rep)
    result = fit(dataset, _fit_config(preset))
    debiased = debias_alpha(result, dataset)
    L = dataset.L_ref
    rv1 = math.sqrt(debiased.hessian_diag[item] * L) * (
        debiased.alpha_debiased[item] - truth.params.alpha[item]
    )
    rv2 = math.nan
    if dataset.d:
        a_inv = beta_block_inverse(result.params, dataset)
        rv2 = math.sqrt(L) * (result.params.beta[0] - truth.params.beta[0]) / math.sqrt(a_inv[0, 0])
    return {"rep": rep, "rv1": rv1, "rv2": rv2}


def _ks(values: np.ndarray) -> Dict[str, float]:
    values = values[np.isfinite(values)]
    if values.size == 0:
        return {"ks_statistic": math.nan, "ks_pvalue": math.nan, "mean": math.nan, "sd": math.nan}
    res = stats.kstest(values, "norm")
    return {
        "ks_statistic": float(res.statistic),
        "ks_pvalue": float(res.pvalue),
        "mean": float(np.mean(values)),
        "sd": float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
    }


def run_normality_experiment(
    preset: ExperimentPreset,
    seed: int = 0,
    reps: Optional[int] = None,
    threads: Optional[int] = None,
    item: Optional[int] = None,
) -> ExperimentOutput:
    """
    去偏估计的正态性实验：RV₁ = √(H_ii·L)(α̂^d_i − α*_i)，RV₂ = √L(β̂₁ − β*₁)/√((A⁻¹)₁₁)

    Args:
        preset: 实验参数
        seed: 场景种子
        reps: 重复次数，缺省取预设值
        threads: 并行进程数
        item: RV₁ 使用的物品，缺省为支撑集中第一个物品

    Returns:
        ExperimentOutput(normality.csv)
    """
    scenario = preset.scenario(seed)
    truth = generate_truth(scenario)
    if item is None:
        item = truth.support[0] if truth.support else 0
    reps = reps or preset.reps
    logger.info("normality experiment: %s, %d reps, item %d", preset.name, reps, item)
    rows = pd.DataFrame(_run(_normality_rep, reps, threads, scenario, truth, preset, item))
    summary = {
        "experiment": "normality",
        "preset": preset.model_dump(by_alias=True),
        "seed": seed,
        "reps": reps,
        "item": item,
        "rv1": _ks(rows["rv1"].to_numpy()),
        "rv2": _ks(rows["rv2"].to_numpy()),
    }
    return ExperimentOutput("normality.csv", rows, summary)


# ---- 拟合优度检验的水平与功效 ----

def _power_rep(
    scenario: Scenario, truth: ScenarioTruth, preset: ExperimentPreset, seed: int, rep: int
) -> Dict:
    dataset = simulate_dataset(scenario, truth, rep)
    result = fit(dataset, _fit_config(preset))
    spec = BootstrapSpec(B=preset.B, seed=replicate_seed(seed, rep), alpha_level=preset.alpha_level, kind="gof")
    gof = gof_test(result, dataset, spec)
    return {"rho": scenario.rho, "rep": rep, "T1": gof.statistic, "c": gof.critical_value, "reject": gof.reject}


def run_power_experiment(
    preset: ExperimentPreset,
    seed: int = 0,
    reps: Optional[int] = None,
    threads: Optional[int] = None,
    rhos: Optional[List[float]] = None,
) -> ExperimentOutput:
    """
    在 ρ 网格上估计 P̂(𝒯₁ > c_{1,1−α})

    Returns:
        ExperimentOutput(power.csv)
    """
    reps = reps or preset.reps
    rhos = list(preset.rhos if rhos is None else rhos)
    frames = []
    for rho in rhos:
        scenario = preset.scenario(seed, alpha_law="gof", rho=rho)
        truth = generate_truth(scenario)
        logger.info("power experiment: rho=%g, %d reps", rho, reps)
        frames.append(pd.DataFrame(_run(_power_rep, reps, threads, scenario, truth, preset, seed)))
    rows = pd.concat(frames, ignore_index=True)
    rates = rows.groupby("rho")["reject"].mean()
    summary = {
        "experiment": "power",
        "preset": preset.model_dump(by_alias=True),
        "seed": seed,
        "reps": reps,
        "rejection_rate": {str(rho): float(rates.loc[rho]) for rho in rates.index},
    }
    return ExperimentOutput("power.csv", rows, summary)


# ---- 排名置信区间覆盖率 ----

def _coverage_rep(
    scenario: Scenario, truth: ScenarioTruth, preset: ExperimentPreset, items: List[int], seed: int, rep: int
) -> List[Dict]:
    dataset = simulate_dataset(scenario, truth, rep)
    result = fit(dataset, _fit_config(preset))
    debiased = debias_alpha(result, dataset)
    refit = two_stage_refit(dataset, result.support)
    theta_star = truth.scores
    spec = BootstrapSpec(
        B=preset.B, seed=replicate_seed(seed, rep), alpha_level=preset.alpha_level, kind="two_sided_rank"
    )
    rows = []
    for stage, two_stage in (("one_stage", False), ("two_stage", True)):
        for m in items:
            res = rank_ci(result, debiased, dataset, items=[m], spec=spec, two_stage=two_stage, refit=refit)
            interval = res.intervals[0]
            true_rank = 1 + int(np.count_nonzero(theta_star > theta_star[m]))
            cover_theta = all(
                pw.lower <= theta_star[pw.k] - theta_star[m] <= pw.upper for pw in res.pairwise
            )
            rows.append(
                {
                    "item": m,
                    "rep": rep,
                    "cover_theta": bool(cover_theta),
                    "cover_rank": bool(interval.lower <= true_rank <= interval.upper),
                    "length": interval.length,
                    "stage": stage,
                }
            )
    return rows


def run_coverage_experiment(
    preset: ExperimentPreset,
    seed: int = 0,
    reps: Optional[int] = None,
    threads: Optional[int] = None,
    items: Optional[List[int]] = None,
) -> ExperimentOutput:
    """
    一阶段与两阶段排名区间的经验覆盖率 EC(r)、EC(θ) 与平均长度（每个物品单独取 ℳ = {m}）

    Returns:
        ExperimentOutput(coverage.csv)
    """
    scenario = preset.scenario(seed)
    truth = generate_truth(scenario)
    items = list(items or preset.items or range(min(6, scenario.n)))
    reps = reps or preset.reps
    logger.info("coverage experiment: %s, %d reps, items %s", preset.name, reps, items)
    nested = _run(_coverage_rep, reps, threads, scenario, truth, preset, items, seed)
    rows = pd.DataFrame([row for rep_rows in nested for row in rep_rows])
    theta_star = truth.scores
    per_item = {}
    for (stage, item), group in rows.groupby(["stage", "item"], sort=True):
        per_item[f"{stage}/{item}"] = {
            "true_rank": 1 + int(np.count_nonzero(theta_star > theta_star[item])),
            "ec_rank": float(group["cover_rank"].mean()),
            "ec_theta": float(group["cover_theta"].mean()),
            "length_mean": float(group["length"].mean()),
            "length_sd": float(group["length"].std(ddof=1)) if len(group) > 1 else 0.0,
        }
    summary = {
        "experiment": "coverage",
        "preset": preset.model_dump(by_alias=True),
        "seed": seed,
        "reps": reps,
        "items": per_item,
    }
    return ExperimentOutput("coverage.csv", rows, summary)


# ---- 支撑集恢复 ----

def _support_rep(scenario: Scenario, truth: ScenarioTruth, preset: ExperimentPreset, rep: int) -> Dict:
    dataset = simulate_dataset(scenario, truth, rep)
    estimated = set(fit(dataset, _fit_config(preset)).support)
    true_support = set(truth.support)
    return {
        "rep": rep,
        "exact": estimated == true_support,
        "subset": estimated <= true_support,
        "support_size": len(estimated),
    }


def run_support_experiment(
    preset: ExperimentPreset,
    seed: int = 0,
    reps: Optional[int] = None,
    threads: Optional[int] = None,
) -> ExperimentOutput:
    """
    支撑集精确恢复率与子集恢复率

    Returns:
        ExperimentOutput(support.csv)
    """
    scenario = preset.scenario(seed)
    truth = generate_truth(scenario)
    reps = reps or preset.reps
    logger.info("support experiment: %s, %d reps", preset.name, reps)
    rows = pd.DataFrame(_run(_support_rep, reps, threads, scenario, truth, preset))
    summary = {
        "experiment": "support",
        "preset": preset.model_dump(by_alias=True),
        "seed": seed,
        "reps": reps,
        "exact_rate": float(rows["exact"].mean()),
        "subset_rate": float(rows["subset"].mean()),
        "mean_support_size": float(rows["support_size"].mean()),
    }
    return ExperimentOutput("support.csv", rows, summary)
