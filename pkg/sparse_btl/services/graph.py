"""
比较图服务

Erdős–Rényi 采样、连通分量与最大连通分量限制。
随机数统一由 make_rng 派生：Philox 计数器生成器，种子为 (seed, 流标签, 序号) 元组。
"""
import logging
from typing import Dict, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from sparse_btl.errors import InvalidInputError
from sparse_btl.models.dataset import ComparisonDataset, ComparisonGraph

logger = logging.getLogger(__name__)

# 随机流标签
STREAM_TRUTH = 0
STREAM_GRAPH = 1
STREAM_DATA = 2
STREAM_BOOTSTRAP = 3
STREAM_POWER = 4

SeedLike = Union[int, np.random.Generator]


def make_rng(*entropy: int) -> np.random.Generator:
    """由非负整数元组派生一个可移植的 Philox 生成器"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(e) for e in entropy])))


def _as_rng(seed: SeedLike, stream: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(seed, stream)


def sample_er_graph(n: int, p: float, seed: SeedLike) -> ComparisonGraph:
    """
    采样 Erdős–Rényi 比较图

    每个点对 (i, j), i > j 按字典序各消耗一个均匀随机数，u < p 时加入边集。

    Args:
        n: 物品数（≥ 2）
        p: 边概率
        seed: 整数种子或已派生的生成器

    Returns:
        ComparisonGraph
    """
    if n < 2:
        raise InvalidInputError("sample_er_graph requires n >= 2")
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"edge probability must lie in [0, 1], got {p}")
    rng = _as_rng(seed, STREAM_GRAPH)
    rows, cols = np.tril_indices(n, k=-1)
    keep = rng.random(rows.size) < p
    edges = np.column_stack([rows[keep], cols[keep]])
    return ComparisonGraph(n=n, edges=edges)


def connected_components(graph: Union[ComparisonGraph, ComparisonDataset]) -> np.ndarray:
    """
    连通分量标签

    标签按分量内最小原始编号的顺序编号，因此编号 0 的分量包含物品 0。
    """
    n = graph.n
    edges = graph.edges
    adj = coo_matrix((np.ones(edges.shape[0]), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, labels = _cc(adj, directed=False)
    _, first = np.unique(labels, return_index=True)
    relabel = np.empty_like(first)
    relabel[np.argsort(first)] = np.arange(first.size)
    return relabel[labels]


def is_connected(graph: Union[ComparisonGraph, ComparisonDataset]) -> bool:
    return bool(graph.n <= 1 or np.max(connected_components(graph)) == 0)


def largest_component_restrict(dataset: ComparisonDataset) -> Tuple[ComparisonDataset, Dict[int, int]]:
    """
    限制到最大连通分量并重新编号

    Args:
        dataset: 原数据集

    Returns:
        (限制后的数据集, 旧编号 -> 新编号 映射)
    """
    labels = connected_components(dataset)
    sizes = np.bincount(labels)
    # argmax 取第一个最大值，即包含最小原始编号的分量
    best = int(np.argmax(sizes))
    keep = np.flatnonzero(labels == best)
    index_map = {int(old): new for new, old in enumerate(keep)}
    if keep.size == dataset.n:
        return dataset, index_map

    new_index = np.full(dataset.n, -1, dtype=np.int64)
    new_index[keep] = np.arange(keep.size)
    mask = (labels[dataset.i_idx] == best) & (labels[dataset.j_idx] == best)
    if dataset.d >= keep.size:
        raise InvalidInputError(
            f"largest component has {keep.size} items, not enough for d={dataset.d} covariates"
        )
    restricted_trials = dataset.trials[mask]
    # 默认 L_ref（平均试验次数）随边集重算；显式给定的 L_ref 保持不变
    default_ref = bool(np.isclose(dataset.L_ref, np.mean(dataset.trials), rtol=1e-12, atol=0.0))
    restricted = ComparisonDataset.from_arrays(
        dataset.covariates[keep] * dataset.covariate_scale,
        new_index[dataset.edges[mask]],
        dataset.wins[mask],
        restricted_trials,
        L_ref=None if default_ref else dataset.L_ref,
    )
    logger.info(
        "restricted to largest component: %d of %d items, %d of %d edges, covariate scale %.6g -> %.6g",
        restricted.n, dataset.n, restricted.num_edges, dataset.num_edges,
        dataset.covariate_scale, restricted.covariate_scale,
    )
    return restricted, index_map
