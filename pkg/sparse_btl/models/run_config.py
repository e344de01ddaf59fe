"""
运行配置模型

RunConfig 由纯文本 key=value 文件填充（见 services.report_io.read_config），
未知键与越界取值一并报告。
"""
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sparse_btl.config import settings


class DataSource(BaseModel):
    """数据集来源：两个 CSV 文件及是否限制到最大连通分量"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    covariates: Path
    comparisons: Path
    restrict_lcc: bool = False


class RunConfig(BaseModel):
    """CLI 运行配置"""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    # 路径
    covariates: Optional[Path] = None
    comparisons: Optional[Path] = None
    out_dir: Optional[Path] = None
    restrict_lcc: bool = False

    # 求解器
    lambda_: Optional[float] = Field(default=None, alias="lambda", ge=0)
    tau: Optional[float] = Field(default=None, ge=0)
    c_lambda: float = Field(default=0.1, gt=0)
    c_tau: float = Field(default=1.0, ge=0)
    eta: Optional[float] = Field(default=None, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.max_iter, ge=1)
    grad_tol: Optional[float] = Field(default=None, gt=0)
    backtracking: bool = True

    # 自助法
    B: int = Field(default_factory=lambda: settings.bootstrap_replicates, ge=1)
    alpha_level: float = Field(default=0.05, gt=0, lt=1)
    sampler: Literal["collapsed", "per_trial"] = "collapsed"
    two_stage: bool = False

    # 实验
    experiment: Optional[Literal["normality", "power", "coverage", "support"]] = None
    preset: Optional[str] = None
    reps: Optional[int] = Field(default=None, ge=1)
    items: Optional[List[int]] = None

    # 随机性与并行
    seed: int = Field(default=0, ge=0)
    threads: Optional[int] = Field(default=None, ge=1)

    @field_validator("items", mode="before")
    @classmethod
    def _split_items(cls, v):
        if isinstance(v, str):
            v = [s for s in (part.strip() for part in v.split(",")) if s]
        return v

    @model_validator(mode="after")
    def _check_paths(self) -> "RunConfig":
        missing = [
            f"{name}={path}"
            for name, path in (("covariates", self.covariates), ("comparisons", self.comparisons))
            if path is not None and not path.exists()
        ]
        if missing:
            raise ValueError(f"referenced files do not exist: {', '.join(missing)}")
        return self

    def data_source(self) -> Optional[DataSource]:
        if self.covariates is None or self.comparisons is None:
            return None
        return DataSource(
            covariates=self.covariates, comparisons=self.comparisons, restrict_lcc=self.restrict_lcc
        )
