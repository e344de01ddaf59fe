"""
应用配置管理模块
使用 Pydantic Settings 集中管理数值默认值

CLI 约定所有行为由显式参数控制，因此这里只接受初始化参数，
不读取环境变量或 .env 文件。
"""
import logging
from typing import Tuple, Type

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict


class Settings(BaseSettings):
    """数值与运行默认值"""

    model_config = SettingsConfigDict(frozen=True, extra="forbid")

    log_level: str = Field(default="INFO", description="日志级别")

    # 近端梯度求解器
    max_iter: int = Field(default=50_000, ge=1, description="最大迭代次数")
    grad_tol_scale: float = Field(default=1e-8, gt=0, description="停止阈值系数 c·(1+‖∇ℒ(θ⁰)‖₂)")
    step_safety: float = Field(default=1.05, ge=1.0, description="步长公式中 λ_max 的放大系数")
    power_iter_tol: float = Field(default=1e-6, gt=0, description="幂迭代相对容差")
    power_iter_max: int = Field(default=1_000, ge=1, description="幂迭代最大步数")
    divergence_patience: int = Field(default=10, ge=1, description="连续目标上升次数上限")
    divergence_tol: float = Field(default=1e-8, ge=0, description="关闭回溯时目标上升的绝对判定容差")
    monotone_tol: float = Field(default=1e-10, ge=0, description="回溯时接受一步所允许的目标上升（绝对量）")
    min_step_ratio: float = Field(default=1e-12, gt=0, description="回溯步长下限 η/η₀")

    # 可识别性诊断
    rank_rtol: float = Field(default=1e-10, gt=0, description="数值秩相对奇异值阈值")

    # 两阶段重拟合（阻尼牛顿）
    refit_tol: float = Field(default=1e-8, gt=0, description="自由坐标梯度范数阈值")
    refit_max_iter: int = Field(default=200, ge=1, description="牛顿步上限")
    refit_ridge: float = Field(default=1e-8, ge=0, description="奇异时回退的岭项")

    # 自助法
    bootstrap_replicates: int = Field(default=200, ge=1, description="默认自助重复次数")

    schema_version: int = Field(default=1, description="报告 JSON 的模式版本")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """验证日志级别"""
        v = v.upper()
        if v not in logging.getLevelNamesMapping():
            raise ValueError(f"log_level must be one of {sorted(logging.getLevelNamesMapping())}")
        return v

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # 只接受显式参数
        return (init_settings,)


# 全局配置实例
settings = Settings()
