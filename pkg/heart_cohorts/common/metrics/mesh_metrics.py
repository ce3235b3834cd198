import numpy as np
from scipy.spatial import cKDTree

from heart_cohorts.common.metrics.metric import ElementwiseMetric
from heart_cohorts.common.utils import minimum, maximum


class Agreement(ElementwiseMetric):
    """Fraction of items whose predicted value equals the reference."""

    def __init__(self, prediction_fn=None, name=None):
        self.prediction_fn = prediction_fn
        if name is None:
            name = "agreement"
        super().__init__(name=name)

    def _compute_element_wise(self, y_pred, y_true):
        if self.prediction_fn is not None:
            y_pred = self.prediction_fn(y_pred)
        return (np.asarray(y_pred) == np.asarray(y_true)).astype(float)

    def worst(self, metrics):
        return minimum(metrics)


class SurfaceDistance(ElementwiseMetric):
    """
    Per-face labelling error in millimetres.
    A correctly labelled face scores 0; a mislabelled face scores the larger of
    its distance to the nearest face truly carrying the predicted label and its
    distance to the nearest face predicted with its true label.
    Group by the true label to obtain per-label mean surface distances.
    """

    def __init__(self, points, name=None):
        self.points = np.asarray(points, dtype=float)
        if name is None:
            name = "surface_distance"
        super().__init__(name=name)

    def _nearest(self, query, candidates):
        if candidates.size == 0:
            return np.full(query.shape[0], np.inf)
        d, _ = cKDTree(self.points[candidates]).query(self.points[query])
        return d

    def _compute_element_wise(self, y_pred, y_true):
        y_pred = np.asarray(y_pred)
        y_true = np.asarray(y_true)
        assert y_pred.shape[0] == self.points.shape[0]
        out = np.zeros(y_pred.shape[0])
        wrong = np.flatnonzero(y_pred != y_true)
        for label in np.unique(y_pred[wrong]):
            q = wrong[y_pred[wrong] == label]
            out[q] = np.maximum(out[q], self._nearest(q, np.flatnonzero(y_true == label)))
        for label in np.unique(y_true[wrong]):
            q = wrong[y_true[wrong] == label]
            out[q] = np.maximum(out[q], self._nearest(q, np.flatnonzero(y_pred == label)))
        return out

    def worst(self, metrics):
        return maximum(metrics)
