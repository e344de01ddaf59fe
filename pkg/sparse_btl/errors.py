"""
异常层次

所有库内错误都继承自 SparseBTLError，CLI 依据异常类型映射退出码：
输入/数据/配置类错误 -> 1，求解/推断类错误 -> 2。
"""
from typing import Optional, Sequence


class SparseBTLError(Exception):
    """库内所有错误的基类"""


class InvalidInputError(SparseBTLError, ValueError):
    """参数或数组不满足前置条件"""


class DataFormatError(SparseBTLError):
    """CSV/JSON 解析错误，携带出错行号"""

    def __init__(self, message: str, path: Optional[str] = None, lines: Sequence[int] = ()):
        self.path = path
        self.lines = list(lines)
        location = ""
        if path:
            location = f"{path}"
        if self.lines:
            shown = ", ".join(str(n) for n in self.lines[:20])
            more = f" (+{len(self.lines) - 20} more)" if len(self.lines) > 20 else ""
            location = f"{location} line(s) {shown}{more}".strip()
        super().__init__(f"{location}: {message}" if location else message)


class ConfigError(SparseBTLError):
    """运行配置不合法"""


class GraphError(SparseBTLError):
    """比较图不连通等图结构问题"""


class IdentifiabilityError(SparseBTLError):
    """参数空间不可识别"""


class SolverError(SparseBTLError):
    """近端梯度求解失败（发散或步长退化）"""

    def __init__(self, message: str, step_size: float):
        self.step_size = step_size
        super().__init__(f"{message} (step size eta={step_size:.6g})")


class RefitError(SparseBTLError):
    """两阶段重拟合失败"""


class InferenceError(SparseBTLError):
    """去偏/自助法/排名推断失败"""
