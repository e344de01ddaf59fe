"""
比较数据模型

ComparisonDataset 保存 n 个物品的协变量（已缩放）与比较图上每条边的胜场/试验次数；
ComparisonGraph 只保存图结构。两者的边都以 (i, j), i > j 的规范形式按字典序存储。

约定：边 (i, j) 上的 wins 记录 j 战胜 i 的次数；似然中的充分统计量
y = (trials - wins) / trials 是 i 获胜的比例。
"""
from typing import Optional

import numpy as np
from pydantic import Field, model_validator

from sparse_btl.models.base import ArrayModel, FloatArray, IntArray


def _edge_matrix(edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return arr.reshape(-1, 2)


def check_canonical_edges(n: int, edges: np.ndarray) -> None:
    """校验边集为规范形式：i > j、落在 [0, n)、无重复、按字典序排列"""
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ValueError("edges must have shape (m, 2)")
    if edges.shape[0] == 0:
        return
    i, j = edges[:, 0], edges[:, 1]
    if np.any(i == j):
        raise ValueError("self-pairs are not allowed")
    if np.any(i < j):
        raise ValueError("edges must be stored as (i, j) with i > j")
    if np.any(j < 0) or np.any(i >= n):
        raise ValueError(f"edge endpoints must lie in [0, {n})")
    keys = i * n + j
    if np.any(np.diff(keys) <= 0):
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate edges are not allowed")
        raise ValueError("edges must be sorted lexicographically")


def canonical_order(edges: np.ndarray, n: int) -> np.ndarray:
    """返回把 (i > j) 边按字典序排列的置换"""
    return np.argsort(edges[:, 0] * n + edges[:, 1], kind="stable")


class ComparisonGraph(ArrayModel):
    """比较图 𝒢 = (𝒱, ℰ)"""

    n: int = Field(..., ge=1, description="顶点数")
    edges: IntArray = Field(..., description="规范形式的无向边 (i, j), i > j")

    @model_validator(mode="before")
    @classmethod
    def _shape_edges(cls, data):
        if isinstance(data, dict) and "edges" in data:
            data = {**data, "edges": _edge_matrix(data["edges"])}
        return data

    @model_validator(mode="after")
    def _check(self) -> "ComparisonGraph":
        check_canonical_edges(self.n, self.edges)
        return self

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])


class ComparisonDataset(ArrayModel):
    """
    比较数据集

    协变量在构造前应已缩放，使 max_i ‖x_i‖₂ ≤ √((d+1)/n)；
    通过 from_arrays 构造会自动完成缩放、边方向规范化与排序。
    """

    n: int = Field(..., ge=1, description="物品数")
    d: int = Field(..., ge=0, description="协变量维度")
    covariates: FloatArray = Field(..., description="n×d 协变量矩阵（缩放后）")
    edges: IntArray = Field(..., description="规范形式的边 (i, j), i > j")
    wins: IntArray = Field(..., description="每条边上 j 战胜 i 的次数")
    trials: IntArray = Field(..., description="每条边上的试验次数 L_ij")
    L_ref: float = Field(..., gt=0, description="参考试验次数（同质时即 L）")
    covariate_scale: float = Field(default=1.0, gt=0, description="缩放系数 K")

    @model_validator(mode="before")
    @classmethod
    def _shape_arrays(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if "edges" in data:
            data["edges"] = _edge_matrix(data["edges"])
        if "covariates" in data and "n" in data and "d" in data:
            cov = np.asarray(data["covariates"], dtype=np.float64)
            if cov.size == 0:
                cov = np.zeros((int(data["n"]), int(data["d"])))
            data["covariates"] = cov
        return data

    @model_validator(mode="after")
    def _check(self) -> "ComparisonDataset":
        if self.covariates.shape != (self.n, self.d):
            raise ValueError(f"covariates must have shape ({self.n}, {self.d}), got {self.covariates.shape}")
        if not np.all(np.isfinite(self.covariates)):
            raise ValueError("covariates must be finite")
        if self.d >= self.n:
            raise ValueError(f"covariate dimension d={self.d} must be smaller than n={self.n}")
        check_canonical_edges(self.n, self.edges)
        m = self.edges.shape[0]
        if self.wins.shape != (m,) or self.trials.shape != (m,):
            raise ValueError("wins and trials must have one entry per edge")
        if np.any(self.trials < 1):
            raise ValueError("trials must be positive integers")
        if np.any(self.wins < 0) or np.any(self.wins > self.trials):
            raise ValueError("wins must satisfy 0 <= wins <= trials")
        if self.d > 0:
            bound = np.sqrt((self.d + 1) / self.n)
            max_norm = float(np.max(np.linalg.norm(self.covariates, axis=1)))
            if max_norm > bound * (1.0 + 1e-12):
                raise ValueError(
                    f"covariates are not rescaled: max row norm {max_norm:.6g} > {bound:.6g}"
                )
        return self

    @classmethod
    def from_arrays(
        cls,
        covariates,
        edges,
        wins,
        trials,
        L_ref: Optional[float] = None,
        rescale: bool = True,
    ) -> "ComparisonDataset":
        """
        由原始数组构造数据集

        Args:
            covariates: n×d 原始协变量
            edges: (i, j) 对；若 i < j 则翻转方向并把 wins 换成 trials - wins
            wins: 每条边上第二个端点获胜的次数
            trials: 每条边上的试验次数
            L_ref: 参考试验次数，缺省为平均试验次数
            rescale: 是否执行协变量缩放

        Returns:
            规范化后的 ComparisonDataset
        """
        from sparse_btl.services.likelihood import rescale_covariates

        cov = np.asarray(covariates, dtype=np.float64)
        if cov.ndim == 1:
            cov = cov.reshape(-1, 1) if cov.size else cov.reshape(0, 0)
        n = cov.shape[0]
        scale = 1.0
        if rescale:
            cov, scale = rescale_covariates(cov)
        e = _edge_matrix(edges).copy()
        w = np.asarray(wins, dtype=np.int64).reshape(-1).copy()
        t = np.asarray(trials, dtype=np.int64).reshape(-1).copy()
        flip = e[:, 0] < e[:, 1]
        e[flip] = e[flip][:, ::-1]
        w[flip] = t[flip] - w[flip]
        order = canonical_order(e, n) if e.shape[0] else np.arange(0)
        if L_ref is None:
            L_ref = float(np.mean(t)) if t.size else 1.0
        return cls(
            n=n,
            d=cov.shape[1],
            covariates=cov,
            edges=e[order],
            wins=w[order],
            trials=t[order],
            L_ref=L_ref,
            covariate_scale=scale,
        )

    # ---- 派生量 ----

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def i_idx(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def j_idx(self) -> np.ndarray:
        return self.edges[:, 1]

    @property
    def y(self) -> np.ndarray:
        """充分统计量：边 (i, j) 上 i 获胜的比例"""
        return (self.trials - self.wins) / self.trials

    @property
    def weights(self) -> np.ndarray:
        """边权 w_ij = L_ij / L_ref（同质试验次数时恰为 1）"""
        return self.trials / self.L_ref

    @property
    def homogeneous(self) -> bool:
        return bool(self.trials.size == 0 or np.all(self.trials == self.trials[0]))

    @property
    def design_bar(self) -> np.ndarray:
        """X̄ = [1 | X]"""
        return np.hstack([np.ones((self.n, 1)), self.covariates])

    def graph(self) -> ComparisonGraph:
        return ComparisonGraph(n=self.n, edges=self.edges)

    def incident_mean_trials(self) -> np.ndarray:
        """每个物品关联边上的平均试验次数；孤立点取 L_ref"""
        deg = np.bincount(self.i_idx, minlength=self.n) + np.bincount(self.j_idx, minlength=self.n)
        tot = np.bincount(self.i_idx, weights=self.trials, minlength=self.n) + np.bincount(
            self.j_idx, weights=self.trials, minlength=self.n
        )
        out = np.full(self.n, self.L_ref, dtype=np.float64)
        mask = deg > 0
        out[mask] = tot[mask] / deg[mask]
        return out

    def with_covariates(self, covariates: np.ndarray) -> "ComparisonDataset":
        """替换协变量（按原样使用，不再缩放）"""
        return self.model_copy(update={"covariates": np.asarray(covariates, dtype=np.float64)})


class DatasetSummary(ArrayModel):
    """数据集概要"""

    n: int
    d: int
    num_edges: int
    num_components: int
    connected: bool
    largest_component_size: int
    homogeneous_trials: bool
    L_ref: float
    covariate_scale: float
