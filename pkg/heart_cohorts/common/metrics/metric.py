import numpy as np

from heart_cohorts.common.utils import avg_over_groups, numel


class Metric:
    """
    A named score over aligned prediction/reference arrays, reported overall and per group.
    Result keys: `<name>_avg`, `<name>_group:<i>`, `count_group:<i>` and `<name>_wg` (worst group).
    """

    def __init__(self, name):
        self._name = name

    @property
    def name(self):
        return self._name

    @property
    def agg_metric_field(self):
        return f'{self.name}_avg'

    def group_metric_field(self, group_idx):
        return f'{self.name}_group:{group_idx}'

    @property
    def worst_group_metric_field(self):
        return f'{self.name}_wg'

    def group_count_field(self, group_idx):
        return f'count_group:{group_idx}'

    def worst(self, metrics):
        """Worst entry of `metrics` (the minimum for scores, the maximum for errors)."""
        raise NotImplementedError

    def _compute(self, y_pred, y_true):
        raise NotImplementedError

    def _compute_group_wise(self, y_pred, y_true, g, n_groups):
        raise NotImplementedError

    def compute(self, y_pred, y_true, return_dict=True):
        """Aggregate metric; 0 for empty inputs."""
        value = 0. if numel(y_true) == 0 else float(self._compute(y_pred, y_true))
        return {self.agg_metric_field: value} if return_dict else value

    def compute_group_wise(self, y_pred, y_true, g, n_groups, return_dict=True):
        """
        Args:
            - g (ndarray): group id per item, in [0, n_groups)
        Output (return_dict=False):
            - group_metrics (ndarray): [n_groups], 0 for empty groups
            - group_counts (ndarray): [n_groups]
            - worst_group_metric (float): over the non-empty groups
        """
        group_metrics, group_counts, worst = self._compute_group_wise(y_pred, y_true, g, n_groups)
        if not return_dict:
            return group_metrics, group_counts, worst
        results = {}
        for i in range(n_groups):
            results[self.group_metric_field(i)] = float(group_metrics[i])
            results[self.group_count_field(i)] = float(group_counts[i])
        results[self.worst_group_metric_field] = float(worst)
        return results


class ElementwiseMetric(Metric):
    """Mean of a per-item score; subclasses implement `_compute_element_wise`."""

    def _compute_element_wise(self, y_pred, y_true):
        raise NotImplementedError

    def _compute(self, y_pred, y_true):
        return np.mean(self._compute_element_wise(y_pred, y_true))

    def _compute_group_wise(self, y_pred, y_true, g, n_groups):
        values = self._compute_element_wise(y_pred, y_true)
        group_metrics, group_counts = avg_over_groups(values, g, n_groups)
        return group_metrics, group_counts, self.worst(group_metrics[group_counts > 0])
