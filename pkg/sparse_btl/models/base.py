"""
Pydantic 基础模型
提供 numpy 数组字段类型与通用的 JSON 转换工具
"""
import json
from pathlib import Path
from typing import Annotated, Any, Dict, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, PlainSerializer


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _as_float_array(value: Any) -> np.ndarray:
    """将列表/数组转换为只读 float64 数组（总是拷贝，保证不可变）"""
    return _readonly(np.array(value, dtype=np.float64, copy=True))


def _as_int_array(value: Any) -> np.ndarray:
    """将列表/数组转换为只读 int64 数组"""
    arr = np.array(value, copy=True)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("expected integer-valued entries")
    return _readonly(arr.astype(np.int64))


def _to_list(arr: np.ndarray) -> list:
    return arr.tolist()


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(_to_list, return_type=list, when_used="json"),
]
IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_int_array),
    PlainSerializer(_to_list, return_type=list, when_used="json"),
]


class ArrayModel(BaseModel):
    """所有含数组字段模型的基类：构造后不可变"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


M = TypeVar("M", bound=BaseModel)


def model_to_json(obj: BaseModel, indent: int = 2) -> str:
    """
    序列化为稳定键序的 JSON

    Args:
        obj: Pydantic 模型对象
        indent: 缩进

    Returns:
        JSON 字符串（sort_keys=True，浮点数以最短往返精度输出）
    """
    return json.dumps(obj.model_dump(mode="json", by_alias=True), sort_keys=True, indent=indent)


def model_from_json(model: Type[M], source: Union[str, Path, Dict[str, Any]]) -> M:
    """从 JSON 文本、文件路径或字典恢复模型"""
    if isinstance(source, Path):
        source = source.read_text(encoding="utf-8")
    if isinstance(source, str):
        source = json.loads(source)
    return model.model_validate(source)
