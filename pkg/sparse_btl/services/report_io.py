"""
报告与配置读写

JSON 报告按键排序写出；运行配置为纯文本 key=value 文件，由 python-dotenv 解析。
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Type, TypeVar, Union

import pandas as pd
from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError

from sparse_btl.errors import ConfigError, DataFormatError
from sparse_btl.models.base import model_from_json, model_to_json
from sparse_btl.models.run_config import RunConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
M = TypeVar("M", bound=BaseModel)


def write_report(report: BaseModel, path: PathLike) -> Path:
    """写出 JSON 报告（稳定键序，浮点数精确往返）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model_to_json(report) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def read_report(path: PathLike, model: Type[M]) -> M:
    """读取 JSON 报告并按模型校验"""
    path = Path(path)
    try:
        return model_from_json(model, path)
    except FileNotFoundError as exc:
        raise DataFormatError("file not found", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc.msg}", path=str(path), lines=[exc.lineno]) from exc


def format_validation_error(exc: ValidationError) -> str:
    """把 pydantic 的全部错误逐条列出"""
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "<config>"
        lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)


def read_config(path: PathLike) -> RunConfig:
    """
    解析 key=value 运行配置

    Args:
        path: 配置文件路径

    Returns:
        RunConfig

    Raises:
        ConfigError: 文件缺失、未知键或取值越界（逐条列出）
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {k: v for k, v in dotenv_values(path, interpolate=False).items() if v is not None and v != ""}
    try:
        return RunConfig.model_validate(values)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{format_validation_error(exc)}") from exc


def _config_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def write_config(config: RunConfig, path: PathLike) -> Path:
    """写出 key=value 配置，省略未设置的可选项"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = config.model_dump(mode="json", by_alias=True, exclude_none=True)
    body = "".join(f"{key}={_config_value(data[key])}\n" for key in sorted(data))
    path.write_text(body, encoding="utf-8")
    return path


def write_experiment(out_dir: PathLike, filename: str, rows: pd.DataFrame, summary: Dict[str, Any]) -> Path:
    """
    写出实验结果表与 summary.json

    Args:
        out_dir: 输出目录
        filename: CSV 文件名，例如 coverage.csv
        rows: 每个重复/条件一行的整洁数据表
        summary: 汇总统计

    Returns:
        CSV 路径
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / filename
    rows.to_csv(csv_path, index=False, float_format="%.17g")
    (out_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s (%d rows) and summary.json", csv_path, len(rows))
    return csv_path
