"""
数据集读写服务

协变量文件：item_id,x1,...,xd（item_id 为从 0 开始的连续整数）
比较文件：item_i,item_j,wins_j,trials（wins_j 为 j 战胜 i 的次数）
        或逐次试验的长格式 winner,loser（加载时按点对聚合）

write_dataset 写出的协变量文件首行为注释行
``# covariate_scale=<K> L_ref=<L>``，加载时据此恢复 K 与 L_ref 且不再缩放。
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from sparse_btl.errors import DataFormatError
from sparse_btl.models.dataset import ComparisonDataset, DatasetSummary
from sparse_btl.services.graph import connected_components

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

AGGREGATED_COLUMNS = ["item_i", "item_j", "wins_j", "trials"]
LONG_COLUMNS = ["winner", "loser"]
METADATA_KEYS = ("covariate_scale", "L_ref")

# DataFrame 第 r 行对应文件第 r + 2 行（表头占第 1 行）
_HEADER_OFFSET = 2


def _lines(mask: Union[pd.Series, np.ndarray], skipped: int = 0) -> List[int]:
    return [int(r) + _HEADER_OFFSET + skipped for r in np.flatnonzero(np.asarray(mask))]


def _read_csv(path: PathLike, skiprows: int = 0) -> pd.DataFrame:
    try:
        return pd.read_csv(path, skipinitialspace=True, float_precision="round_trip", skiprows=skiprows)
    except FileNotFoundError as exc:
        raise DataFormatError("file not found", path=str(path)) from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"cannot parse CSV: {exc}", path=str(path)) from exc


def _read_metadata(path: PathLike) -> Optional[Dict[str, float]]:
    """解析协变量文件首行的元数据注释；没有注释行时返回 None"""
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
    except FileNotFoundError as exc:
        raise DataFormatError("file not found", path=str(path)) from exc
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"cannot parse CSV: {exc}", path=str(path)) from exc
    if not first.startswith("#"):
        return None
    meta: Dict[str, float] = {}
    for token in first.lstrip("#").split():
        key, sep, value = token.partition("=")
        if not sep or key not in METADATA_KEYS:
            raise DataFormatError(f"unknown metadata entry {token!r}", path=str(path), lines=[1])
        try:
            meta[key] = float(value)
        except ValueError as exc:
            raise DataFormatError(f"metadata {key} must be a number", path=str(path), lines=[1]) from exc
        if not np.isfinite(meta[key]) or meta[key] <= 0:
            raise DataFormatError(f"metadata {key} must be positive", path=str(path), lines=[1])
    return meta


def _integer_column(df: pd.DataFrame, column: str, path: PathLike, skipped: int = 0) -> np.ndarray:
    values = pd.to_numeric(df[column], errors="coerce")
    bad = values.isna() | (values % 1 != 0)
    if bad.any():
        raise DataFormatError(
            f"column {column!r} must hold integers", path=str(path), lines=_lines(bad, skipped)
        )
    return values.to_numpy(dtype=np.int64)


def _read_covariates(path: PathLike, skipped: int = 0) -> np.ndarray:
    df = _read_csv(path, skiprows=skipped)
    if not len(df.columns) or df.columns[0] != "item_id":
        raise DataFormatError("covariates header must start with 'item_id'", path=str(path), lines=[1 + skipped])
    ids = _integer_column(df, "item_id", path, skipped)
    duplicated = pd.Series(ids).duplicated(keep=False)
    if duplicated.any():
        raise DataFormatError("duplicate item ids", path=str(path), lines=_lines(duplicated, skipped))
    n = ids.size
    out_of_range = (ids < 0) | (ids >= n)
    if out_of_range.any():
        missing = sorted(set(range(n)) - set(ids.tolist()))
        raise DataFormatError(
            f"item ids must be contiguous 0..{n - 1}; missing ids {missing[:20]}",
            path=str(path),
            lines=_lines(out_of_range, skipped),
        )
    values = df.iloc[:, 1:].apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1) | ~np.isfinite(values.to_numpy(dtype=np.float64)).all(axis=1)
    if bad.any():
        raise DataFormatError("covariates must be finite numbers", path=str(path), lines=_lines(bad, skipped))
    covariates = np.empty((n, values.shape[1]))
    covariates[ids] = values.to_numpy(dtype=np.float64)
    return covariates

def _aggregate_long(df: pd.DataFrame, n: int, path: PathLike) -> pd.DataFrame:
    winner = _integer_column(df, "winner", path)
    loser = _integer_column(df, "loser", path)
    _check_items(winner, loser, n, path)
    i = np.maximum(winner, loser)
    j = np.minimum(winner, loser)
    frame = pd.DataFrame({"item_i": i, "item_j": j, "wins_j": (winner == j).astype(np.int64), "trials": 1})
    return frame.groupby(["item_i", "item_j"], as_index=False, sort=True).sum()


def _check_items(a: np.ndarray, b: np.ndarray, n: int, path: PathLike) -> None:
    unknown = (a < 0) | (a >= n) | (b < 0) | (b >= n)
    if unknown.any():
        raise DataFormatError(f"item ids outside 0..{n - 1}", path=str(path), lines=_lines(unknown))
    self_pairs = a == b
    if self_pairs.any():
        raise DataFormatError("self-pairs are not allowed", path=str(path), lines=_lines(self_pairs))


def _read_aggregated(df: pd.DataFrame, n: int, path: PathLike) -> pd.DataFrame:
    i = _integer_column(df, "item_i", path)
    j = _integer_column(df, "item_j", path)
    wins = _integer_column(df, "wins_j", path)
    trials = _integer_column(df, "trials", path)
    _check_items(i, j, n, path)
    bad_trials = trials < 1
    if bad_trials.any():
        raise DataFormatError("trials must be positive", path=str(path), lines=_lines(bad_trials))
    bad_wins = (wins < 0) | (wins > trials)
    if bad_wins.any():
        raise DataFormatError("wins_j must satisfy 0 <= wins_j <= trials", path=str(path), lines=_lines(bad_wins))
    key = pd.Series(np.maximum(i, j) * n + np.minimum(i, j))
    duplicated = key.duplicated(keep=False)
    if duplicated.any():
        raise DataFormatError("duplicate item pairs", path=str(path), lines=_lines(duplicated))
    return pd.DataFrame({"item_i": i, "item_j": j, "wins_j": wins, "trials": trials})


def load_dataset(covariates_path: PathLike, comparisons_path: PathLike) -> ComparisonDataset:
    """
    加载并校验数据集

    Args:
        covariates_path: 协变量 CSV
        comparisons_path: 比较 CSV（聚合格式或长格式）

    Returns:
        规范化的 ComparisonDataset（协变量已缩放，边按字典序排列）

    Raises:
        DataFormatError: 表头、取值或重复行错误，附带出错行号
    """
    meta = _read_metadata(covariates_path)
    covariates = _read_covariates(covariates_path, skipped=1 if meta is not None else 0)
    n = covariates.shape[0]
    df = _read_csv(comparisons_path)
    columns = [str(c) for c in df.columns]
    if columns == AGGREGATED_COLUMNS:
        table = _read_aggregated(df, n, comparisons_path)
    elif columns == LONG_COLUMNS:
        table = _aggregate_long(df, n, comparisons_path)
    else:
        raise DataFormatError(
            f"comparisons header must be {','.join(AGGREGATED_COLUMNS)} or {','.join(LONG_COLUMNS)}",
            path=str(comparisons_path),
            lines=[1],
        )
    try:
        dataset = ComparisonDataset.from_arrays(
            covariates,
            table[["item_i", "item_j"]].to_numpy(),
            table["wins_j"].to_numpy(),
            table["trials"].to_numpy(),
            L_ref=meta.get("L_ref") if meta else None,
            rescale=meta is None,
        )
    except ValueError as exc:
        raise DataFormatError(str(exc), path=str(covariates_path)) from exc
    if meta and "covariate_scale" in meta:
        dataset = dataset.model_copy(update={"covariate_scale": meta["covariate_scale"]})
    summary = summarize_dataset(dataset)
    logger.info(
        "loaded dataset: n=%d d=%d edges=%d components=%d connected=%s",
        summary.n, summary.d, summary.num_edges, summary.num_components, summary.connected,
    )
    return dataset


def summarize_dataset(dataset: ComparisonDataset) -> DatasetSummary:
    """n、d、|ℰ|、连通分量数等概要信息"""
    labels = connected_components(dataset)
    sizes = np.bincount(labels)
    return DatasetSummary(
        n=dataset.n,
        d=dataset.d,
        num_edges=dataset.num_edges,
        num_components=int(sizes.size),
        connected=bool(sizes.size == 1),
        largest_component_size=int(sizes.max()),
        homogeneous_trials=dataset.homogeneous,
        L_ref=dataset.L_ref,
        covariate_scale=dataset.covariate_scale,
    )


def write_dataset(dataset: ComparisonDataset, covariates_path: PathLike, comparisons_path: PathLike) -> None:
    """
    以完整精度写出两个 CSV 文件

    协变量文件首行记录缩放系数 K 与 L_ref，重新加载后所有字段逐位一致。
    """
    cov = pd.DataFrame(dataset.covariates, columns=[f"x{c + 1}" for c in range(dataset.d)])
    cov.insert(0, "item_id", np.arange(dataset.n))
    cmp = pd.DataFrame(
        {
            "item_i": dataset.i_idx,
            "item_j": dataset.j_idx,
            "wins_j": dataset.wins,
            "trials": dataset.trials,
        }
    )
    for path in (covariates_path, comparisons_path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(covariates_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# covariate_scale={float(dataset.covariate_scale)!r} L_ref={float(dataset.L_ref)!r}\n")
        cov.to_csv(fh, index=False, float_format="%.17g")
    cmp.to_csv(comparisons_path, index=False)


def write_index_map(index_map: Dict[int, int], path: PathLike) -> None:
    """最大连通分量重新编号报告：old_id,new_id"""
    frame = pd.DataFrame(sorted(index_map.items()), columns=["old_id", "new_id"])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)


def load_new_items(path: PathLike, d: int, covariate_scale: float = 1.0):
    """
    读取样本外物品的协变量 Z

    文件格式为 item_id[,donor],x1,...,xd；donor 列给出借用内在得分的训练物品。
    协变量除以训练数据的缩放系数 K，与训练协变量处于同一尺度。

    Returns:
        (n'×d 矩阵 Z, donor 数组或 None)
    """
    df = _read_csv(path)
    if not len(df.columns) or df.columns[0] != "item_id":
        raise DataFormatError("new-items header must start with 'item_id'", path=str(path), lines=[1])
    donors = None
    feature_columns = [c for c in df.columns[1:] if c != "donor"]
    if "donor" in df.columns:
        donors = _integer_column(df, "donor", path)
    if len(feature_columns) != d:
        raise DataFormatError(f"expected {d} covariate columns, found {len(feature_columns)}", path=str(path), lines=[1])
    ids = _integer_column(df, "item_id", path)
    order = np.argsort(ids, kind="stable")
    if not np.array_equal(ids[order], np.arange(ids.size)):
        raise DataFormatError("item ids must be contiguous 0..n'-1", path=str(path))
    values = df[feature_columns].apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1)
    if bad.any():
        raise DataFormatError("covariates must be numbers", path=str(path), lines=_lines(bad))
    Z = values.to_numpy(dtype=np.float64)[order] / covariate_scale
    return Z, (donors[order] if donors is not None else None)
