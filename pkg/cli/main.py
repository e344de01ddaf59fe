"""
sparse-btl 命令行程序

子命令覆盖数据模拟、拟合、去偏、拟合优度检验、排名区间、前 K 筛选、λ 网格与蒙特卡洛实验。
所有随机性由 --seed 控制；错误信息写到 stderr，退出码：0 成功，1 输入/配置错误，2 求解/推断失败。
"""
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import click
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from sparse_btl.config import settings
from sparse_btl.errors import (
    ConfigError,
    DataFormatError,
    GraphError,
    IdentifiabilityError,
    InferenceError,
    InvalidInputError,
    RefitError,
    SolverError,
)
from sparse_btl.models import BootstrapSpec, DataSource, FitConfig, RunConfig, Scenario
from sparse_btl.services.dataset_io import write_dataset, write_index_map
from sparse_btl.services.report_io import format_validation_error, read_config, write_experiment, write_report
from sparse_btl.workflows import experiments, pipeline
from sparse_btl.workflows.simulation import generate_truth, simulate_dataset

logger = logging.getLogger("sparse_btl.cli")

# 结果表格写 stdout，错误写 stderr
console = Console()
err_console = Console(stderr=True, soft_wrap=True)

app = typer.Typer(
    name="sparse-btl",
    help="稀疏 BTL 模型：带协变量的成对比较拟合、去偏推断与排名置信区间",
    add_completion=False,
    no_args_is_help=True,
)

INPUT_ERRORS = (
    InvalidInputError,
    DataFormatError,
    ConfigError,
    GraphError,
    IdentifiabilityError,
    ValidationError,
    click.UsageError,
)
NUMERIC_ERRORS = (SolverError, RefitError, InferenceError)


def _setup_logging(level: str) -> None:
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    logging.basicConfig(level=level.upper(), format="%(message)s", handlers=[handler], force=True)


def _config(ctx: typer.Context) -> RunConfig:
    return ctx.obj if isinstance(ctx.obj, RunConfig) else RunConfig()


def _pick(flag, configured):
    """命令行参数优先，其次为 --config 文件中的取值"""
    return flag if flag is not None else configured


def _parse_list(text: Optional[str], cast, name: str) -> Optional[List]:
    if text is None:
        return None
    try:
        return [cast(part) for part in (p.strip() for p in text.split(",")) if part]
    except ValueError as exc:
        raise InvalidInputError(f"--{name} must be a comma-separated list: {text!r}") from exc


@app.callback()
def root(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", help="key=value 运行配置文件；命令行参数优先"),
    log_level: str = typer.Option(settings.log_level, "--log-level", help="日志级别"),
) -> None:
    _setup_logging(log_level)
    ctx.obj = read_config(config) if config is not None else RunConfig()


def _source(cfg: RunConfig, covariates: Optional[Path], comparisons: Optional[Path], restrict_lcc: bool) -> DataSource:
    covariates = _pick(covariates, cfg.covariates)
    comparisons = _pick(comparisons, cfg.comparisons)
    if covariates is None or comparisons is None:
        raise click.UsageError("--covariates and --comparisons are required")
    return DataSource(covariates=covariates, comparisons=comparisons, restrict_lcc=restrict_lcc or cfg.restrict_lcc)


def _fit_config(
    cfg: RunConfig,
    lambda_: Optional[float],
    tau: Optional[float],
    c_lambda: Optional[float],
    c_tau: Optional[float],
    eta: Optional[float],
    max_iter: Optional[int],
    grad_tol: Optional[float],
    no_backtracking: bool,
) -> FitConfig:
    return FitConfig(
        lambda_=_pick(lambda_, cfg.lambda_),
        tau=_pick(tau, cfg.tau),
        c_lambda=_pick(c_lambda, cfg.c_lambda),
        c_tau=_pick(c_tau, cfg.c_tau),
        eta=_pick(eta, cfg.eta),
        max_iter=_pick(max_iter, cfg.max_iter),
        grad_tol=_pick(grad_tol, cfg.grad_tol),
        backtracking=cfg.backtracking and not no_backtracking,
    )


def _spec(cfg: RunConfig, kind: str, B: Optional[int], alpha: Optional[float], seed: Optional[int], sampler: Optional[str]) -> BootstrapSpec:
    return BootstrapSpec(
        B=_pick(B, cfg.B),
        alpha_level=_pick(alpha, cfg.alpha_level),
        seed=_pick(seed, cfg.seed),
        sampler=_pick(sampler, cfg.sampler),
        kind=kind,
    )


# ---- 共享选项 ----

COVARIATES = typer.Option(None, "--covariates", help="协变量 CSV：item_id,x1,...,xd")
COMPARISONS = typer.Option(None, "--comparisons", help="比较 CSV：item_i,item_j,wins_j,trials 或 winner,loser")
RESTRICT_LCC = typer.Option(False, "--restrict-lcc", help="图不连通时限制到最大连通分量并写出 index_map.csv")
LAMBDA = typer.Option(None, "--lambda", help="α 的 ℓ₁ 惩罚 λ；缺省取 c_λ·κ₁·√((d+1)·n·p̂·log n/L) 调参公式")
TAU = typer.Option(None, "--tau", help="岭惩罚 τ；缺省取 c_τ·min(κ 比值)·√(log n/(n·L)) 调参公式")
C_LAMBDA = typer.Option(None, "--c-lambda", help="λ 调参公式常数 c_λ（默认 0.1）")
C_TAU = typer.Option(None, "--c-tau", help="τ 调参公式常数 c_τ（默认 1）")
ETA = typer.Option(None, "--eta", help="步长 η；缺省为 2/(2τ + 1.05·λ_max(∇²ℒ))")
MAX_ITER = typer.Option(None, "--max-iter", help="近端梯度最大迭代次数")
GRAD_TOL = typer.Option(None, "--grad-tol", help="梯度映射停止阈值；缺省 1e-8·(1+‖∇ℒ(θ⁰)‖)")
NO_BACKTRACKING = typer.Option(False, "--no-backtracking", help="关闭目标函数上升时的步长减半")
FIT_FILE = typer.Option(..., "--fit", help="fit 子命令写出的 fit.json")
B_OPT = typer.Option(None, "--B", help="高斯乘子自助重复次数 B（默认 200）")
ALPHA_OPT = typer.Option(None, "--alpha", help="显著性水平 α（默认 0.05）")
SEED_OPT = typer.Option(None, "--seed", help="随机种子")
SAMPLER_OPT = typer.Option(None, "--sampler", help="乘子抽样：collapsed（按边合并）或 per_trial（逐次试验）")
NEW_ITEMS = typer.Option(None, "--new-items", help="样本外物品 CSV：item_id[,donor],x1,...,xd")
TWO_STAGE = typer.Option(False, "--two-stage", help="在估计支撑集上做无惩罚重拟合后再推断")
PRESET = typer.Option(None, "--preset", help=f"实验参数组：{', '.join(sorted(experiments.PRESETS))}")
REPS = typer.Option(None, "--reps", help="蒙特卡洛重复次数；缺省取参数组的设定")
THREADS = typer.Option(None, "--threads", help="并行进程数；缺省使用全部核心，1 为单进程参考路径")
OUT_DIR = typer.Option(None, "--out-dir", help="输出目录")


@app.command()
def simulate(
    ctx: typer.Context,
    preset: Optional[str] = PRESET,
    n: Optional[int] = typer.Option(None, "--n", help="物品数 n"),
    d: Optional[int] = typer.Option(None, "--d", help="协变量维数 d"),
    k: Optional[int] = typer.Option(None, "--k", help="非零内在得分个数 k"),
    p: Optional[float] = typer.Option(None, "--p", help="Erdős–Rényi 连边概率 p"),
    L: Optional[int] = typer.Option(None, "--L", help="每条边的比较次数 L"),
    seed: Optional[int] = SEED_OPT,
    rep: int = typer.Option(0, "--rep", help="重复序号（派生比较图与比较结果的随机流）"),
    out_dir: Optional[Path] = OUT_DIR,
) -> None:
    """按场景生成合成数据：covariates.csv、comparisons.csv 与 truth.json"""
    cfg = _config(ctx)
    base = experiments.get_preset(_pick(preset, cfg.preset) or "table1")
    overrides = {key: value for key, value in dict(n=n, d=d, k=k, p=p, L=L).items() if value is not None}
    scenario: Scenario = base.scenario(_pick(seed, cfg.seed), **overrides)
    truth = generate_truth(scenario)
    dataset = simulate_dataset(scenario, truth, rep)
    out = Path(_pick(out_dir, cfg.out_dir) or ".")
    write_dataset(dataset, out / "covariates.csv", out / "comparisons.csv")
    write_report(truth, out / "truth.json")
    console.print(f"wrote {dataset.num_edges} comparisons over {dataset.n} items to {out}")


@app.command()
def fit(
    ctx: typer.Context,
    covariates: Optional[Path] = COVARIATES,
    comparisons: Optional[Path] = COMPARISONS,
    lambda_: Optional[float] = LAMBDA,
    tau: Optional[float] = TAU,
    c_lambda: Optional[float] = C_LAMBDA,
    c_tau: Optional[float] = C_TAU,
    eta: Optional[float] = ETA,
    max_iter: Optional[int] = MAX_ITER,
    grad_tol: Optional[float] = GRAD_TOL,
    no_backtracking: bool = NO_BACKTRACKING,
    restrict_lcc: bool = RESTRICT_LCC,
    out: Path = typer.Option(Path("fit.json"), "--out", help="拟合结果 JSON"),
) -> None:
    """正则化极大似然估计 (α̂_R, β̂_R)"""
    cfg = _config(ctx)
    source = _source(cfg, covariates, comparisons, restrict_lcc)
    config = _fit_config(cfg, lambda_, tau, c_lambda, c_tau, eta, max_iter, grad_tol, no_backtracking)
    result, index_map = pipeline.run_fit(source, config)
    write_report(result, out)
    if index_map is not None:
        write_index_map(index_map, out.parent / "index_map.csv")
    status = "converged" if result.converged else "NOT converged"
    console.print(
        f"{status} after {result.iterations} iterations; |support|={len(result.support)} "
        f"lambda={result.lambda_:.6g} tau={result.tau:.6g}"
    )


@app.command()
def debias(
    fit_file: Path = FIT_FILE,
    out: Path = typer.Option(Path("debias.json"), "--out", help="去偏报告 JSON"),
) -> None:
    """去偏估计 α̂^d 与 Hessian 对角线"""
    write_report(pipeline.run_debias(fit_file), out)


@app.command()
def gof(
    ctx: typer.Context,
    fit_file: Path = FIT_FILE,
    B: Optional[int] = B_OPT,
    alpha: Optional[float] = ALPHA_OPT,
    seed: Optional[int] = SEED_OPT,
    sampler: Optional[str] = SAMPLER_OPT,
    out: Path = typer.Option(Path("gof.json"), "--out", help="检验报告 JSON"),
) -> None:
    """拟合优度检验 H₀: α* = 0（最大型统计量 + 高斯乘子自助法）"""
    spec = _spec(_config(ctx), "gof", B, alpha, seed, sampler)
    report = pipeline.run_gof(fit_file, spec)
    write_report(report, out)
    result = report.gof
    table = Table(title="goodness of fit")
    for column in ("T1", "critical value", "p-value", "reject"):
        table.add_column(column)
    table.add_row(
        f"{result.statistic:.6g}", f"{result.critical_value:.6g}", f"{result.p_value:.4g}", str(result.reject)
    )
    console.print(table)


@app.command("rank-ci")
def rank_ci(
    ctx: typer.Context,
    fit_file: Path = FIT_FILE,
    items: Optional[str] = typer.Option(None, "--items", help="目标物品集合 ℳ，逗号分隔；缺省为全部"),
    new_items: Optional[Path] = NEW_ITEMS,
    two_stage: bool = TWO_STAGE,
    one_sided: bool = typer.Option(False, "--one-sided", help="只给出排名下界（单侧区间）"),
    B: Optional[int] = B_OPT,
    alpha: Optional[float] = ALPHA_OPT,
    seed: Optional[int] = SEED_OPT,
    sampler: Optional[str] = SAMPLER_OPT,
    out: Path = typer.Option(Path("rank_ci.json"), "--out", help="排名区间报告 JSON"),
) -> None:
    """同时排名置信区间"""
    cfg = _config(ctx)
    kind = "one_sided_rank" if one_sided else "two_sided_rank"
    spec = _spec(cfg, kind, B, alpha, seed, sampler)
    report = pipeline.run_rank_ci(
        fit_file,
        spec,
        items=_pick(_parse_list(items, int, "items"), cfg.items),
        new_items=new_items,
        two_stage=two_stage or cfg.two_stage,
        one_sided=one_sided,
    )
    write_report(report, out)
    table = Table(title=f"rank intervals ({report.rank_ci.stage})")
    for column in ("item", "score", "lower", "upper"):
        table.add_column(column)
    scores = report.rank_ci.scores
    for interval in report.rank_ci.intervals:
        table.add_row(str(interval.item), f"{scores[interval.item]:.4f}", str(interval.lower), str(interval.upper))
    console.print(table)


@app.command()
def topk(
    ctx: typer.Context,
    fit_file: Path = FIT_FILE,
    K: int = typer.Option(..., "--K", help="排名阈值 K"),
    item: Optional[int] = typer.Option(None, "--item", help="给定时检验 H₀: r(item) ≤ K，否则筛选前 K"),
    new_items: Optional[Path] = NEW_ITEMS,
    two_stage: bool = TWO_STAGE,
    B: Optional[int] = B_OPT,
    alpha: Optional[float] = ALPHA_OPT,
    seed: Optional[int] = SEED_OPT,
    sampler: Optional[str] = SAMPLER_OPT,
    out: Path = typer.Option(Path("topk.json"), "--out", help="筛选报告 JSON"),
) -> None:
    """前 K 筛选或排名阈值检验"""
    cfg = _config(ctx)
    spec = _spec(cfg, "one_sided_rank", B, alpha, seed, sampler)
    report = pipeline.run_topk(
        fit_file, K, spec, item=item, new_items=new_items, two_stage=two_stage or cfg.two_stage
    )
    write_report(report, out)
    if report.threshold is not None:
        decision = report.threshold
        console.print(f"item {decision.item}: lower bound {decision.lower_bound}, reject H0(r <= {K}) = {decision.reject}")
    else:
        console.print(f"top-{K} candidates: {list(report.topk.selected)}")


@app.command("lambda-path")
def lambda_path(
    ctx: typer.Context,
    lambdas: str = typer.Option(..., "--lambdas", help="λ 网格，逗号分隔"),
    covariates: Optional[Path] = COVARIATES,
    comparisons: Optional[Path] = COMPARISONS,
    tau: Optional[float] = TAU,
    restrict_lcc: bool = RESTRICT_LCC,
    B: Optional[int] = B_OPT,
    alpha: Optional[float] = ALPHA_OPT,
    seed: Optional[int] = SEED_OPT,
    sampler: Optional[str] = SAMPLER_OPT,
    out: Path = typer.Option(Path("lambda_path.csv"), "--out", help="结果表 CSV"),
) -> None:
    """在 λ 网格上热启动拟合，逐个报告支撑集大小与拟合优度检验"""
    cfg = _config(ctx)
    source = _source(cfg, covariates, comparisons, restrict_lcc)
    config = _fit_config(cfg, None, tau, None, None, None, None, None, False)
    grid = _parse_list(lambdas, float, "lambdas")
    if not grid:
        raise click.UsageError("--lambdas must list at least one value")
    frame = pipeline.run_lambda_path(source, grid, config, _spec(cfg, "gof", B, alpha, seed, sampler))
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format="%.17g")
    console.print(frame.to_string(index=False))


def _bench(ctx: typer.Context, runner, preset: Optional[str], reps, seed, threads, out_dir, default: str, **kwargs) -> None:
    cfg = _config(ctx)
    output = runner(
        experiments.get_preset(_pick(preset, cfg.preset) or default),
        seed=_pick(seed, cfg.seed),
        reps=_pick(reps, cfg.reps),
        threads=_pick(threads, cfg.threads),
        **kwargs,
    )
    out = Path(_pick(out_dir, cfg.out_dir) or ".")
    path = write_experiment(out, output.filename, output.rows, output.summary)
    console.print(f"wrote {path}")


@app.command("bench-normality")
def bench_normality(
    ctx: typer.Context,
    preset: Optional[str] = PRESET,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED_OPT,
    threads: Optional[int] = THREADS,
    item: Optional[int] = typer.Option(None, "--item", help="RV₁ 使用的物品（默认第一个非零内在得分物品）"),
    out_dir: Optional[Path] = OUT_DIR,
) -> None:
    """去偏估计的渐近正态性实验（normality.csv）"""
    _bench(ctx, experiments.run_normality_experiment, preset, reps, seed, threads, out_dir, "fig1", item=item)


@app.command("bench-power")
def bench_power(
    ctx: typer.Context,
    preset: Optional[str] = PRESET,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED_OPT,
    threads: Optional[int] = THREADS,
    rhos: Optional[str] = typer.Option(None, "--rhos", help="信号强度 ρ 网格，逗号分隔"),
    out_dir: Optional[Path] = OUT_DIR,
) -> None:
    """拟合优度检验的水平与功效实验（power.csv）"""
    _bench(
        ctx, experiments.run_power_experiment, preset, reps, seed, threads, out_dir, "fig3",
        rhos=_parse_list(rhos, float, "rhos"),
    )


@app.command("bench-coverage")
def bench_coverage(
    ctx: typer.Context,
    preset: Optional[str] = PRESET,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED_OPT,
    threads: Optional[int] = THREADS,
    items: Optional[str] = typer.Option(None, "--items", help="评估覆盖率的物品，逗号分隔"),
    out_dir: Optional[Path] = OUT_DIR,
) -> None:
    """一阶段与两阶段排名区间的覆盖率实验（coverage.csv）"""
    cfg = _config(ctx)
    _bench(
        ctx, experiments.run_coverage_experiment, preset, reps, seed, threads, out_dir, "table1",
        items=_pick(_parse_list(items, int, "items"), cfg.items),
    )


@app.command("bench-support")
def bench_support(
    ctx: typer.Context,
    preset: Optional[str] = PRESET,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED_OPT,
    threads: Optional[int] = THREADS,
    out_dir: Optional[Path] = OUT_DIR,
) -> None:
    """支撑集恢复率实验（support.csv）"""
    _bench(ctx, experiments.run_support_experiment, preset, reps, seed, threads, out_dir, "table1")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    CLI 入口

    Args:
        argv: 命令行参数（不含程序名）；缺省读取 sys.argv

    Returns:
        退出码
    """
    args = list(sys.argv[1:] if argv is None else argv)
    command = typer.main.get_command(app)
    try:
        code = command.main(args=args, prog_name="sparse-btl", standalone_mode=False)
    except ValidationError as exc:
        err_console.print(f"[red]error:[/red] invalid input\n{escape(format_validation_error(exc))}")
        return 1
    except INPUT_ERRORS as exc:
        err_console.print(f"[red]error:[/red] {escape(str(exc))}")
        return 1
    except NUMERIC_ERRORS as exc:
        err_console.print(f"[red]{type(exc).__name__}:[/red] {escape(str(exc))}")
        return 2
    except click.ClickException as exc:
        err_console.print(f"[red]error:[/red] {escape(exc.format_message())}")
        return exc.exit_code
    except click.exceptions.Abort:
        err_console.print("[yellow]aborted[/yellow]")
        return 1
    return code if isinstance(code, int) else 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
