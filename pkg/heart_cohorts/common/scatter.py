from typing import Optional

import numpy as np


def scatter_sum(src: np.ndarray, index: np.ndarray, dim_size: Optional[int] = None) -> np.ndarray:
    """
    Sums rows of `src` into `dim_size` bins along axis 0.
    Contributions are accumulated in index order, so the result is deterministic.
    """
    src = np.asarray(src)
    index = np.asarray(index, dtype=np.int64)
    if dim_size is None:
        dim_size = int(index.max()) + 1 if index.size else 0
    out = np.zeros((dim_size,) + src.shape[1:], dtype=np.result_type(src.dtype, np.float64))
    np.add.at(out, index, src)
    return out


def scatter_mean(src: np.ndarray, index: np.ndarray, dim_size: Optional[int] = None) -> np.ndarray:
    out = scatter_sum(src, index, dim_size)
    count = np.bincount(np.asarray(index, dtype=np.int64), minlength=out.shape[0])[:out.shape[0]]
    count = np.maximum(count, 1).astype(float)
    return out / count.reshape((-1,) + (1,) * (out.ndim - 1))
