import numpy as np

import heart_cohorts.common.scatter as scatter


def numel(obj):
    if isinstance(obj, np.ndarray):
        return obj.size
    elif isinstance(obj, (list, tuple)):
        return len(obj)
    else:
        raise TypeError("Invalid type for numel")

def avg_over_groups(v, g, n_groups, weights=None):
    """
    Args:
        v (ndarray): Vector containing the quantity to average over.
        g (ndarray): Vector of the same length as v, containing group information.
        weights (ndarray): Optional per-element weights (e.g. face areas).
    Returns:
        group_avgs (ndarray): Vector of length num_groups
        group_counts (ndarray)
    """
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=np.int64)
    assert v.shape == g.shape
    group_count = get_counts(g, n_groups)
    if weights is None:
        group_avgs = scatter.scatter_mean(v, g, dim_size=n_groups)
    else:
        weights = np.asarray(weights, dtype=float)
        total = scatter.scatter_sum(v * weights, g, dim_size=n_groups)
        norm = scatter.scatter_sum(weights, g, dim_size=n_groups)
        group_avgs = np.divide(total, norm, out=np.zeros(n_groups), where=norm > 0)
    return group_avgs, group_count

def get_counts(g, n_groups):
    """
    Count vector of length n_groups; groups missing from g count 0.
    Args:
        - g (ndarray): Vector of groups
    Returns:
        - counts (ndarray): A vector of length n_groups, denoting the count of each group.
    """
    g = np.asarray(g, dtype=np.int64)
    return np.bincount(g, minlength=n_groups)[:n_groups].astype(float)

def minimum(numbers, empty_val=0.):
    """NaN-ignoring minimum; `empty_val` for empty input."""
    numbers = np.asarray(numbers, dtype=float)
    return float(np.nanmin(numbers)) if numbers.size else empty_val


def maximum(numbers, empty_val=0.):
    numbers = np.asarray(numbers, dtype=float)
    return float(np.nanmax(numbers)) if numbers.size else empty_val


def normalize_rows(v, eps=0.0):
    """
    Row-wise unit vectors. Rows with norm <= eps come back as zero vectors.
    Returns:
        - unit (ndarray): (n, 3)
        - norms (ndarray): (n,)
    """
    v = np.asarray(v, dtype=float)
    norms = np.sqrt(v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1] + v[:, 2] * v[:, 2])
    unit = np.zeros_like(v)
    ok = norms > eps
    unit[ok] = v[ok] / norms[ok, None]
    return unit, norms

def cross_rows(a, b):
    # explicit components so results do not depend on array layout
    return np.stack((a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1],
                     a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2],
                     a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]), axis=1)

def dot_rows(a, b):
    return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]
