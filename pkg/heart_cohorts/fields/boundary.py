import logging

import numpy as np

from heart_cohorts.errors import MissingLabel
from heart_cohorts.fields.laplace import DirichletSpec
from heart_cohorts.labelling.labels import SurfaceLabel
from heart_cohorts.mesh_build.transfer import label_node_sets, surface_node_labels

logger = logging.getLogger(__name__)


class NodeLabels:
    """
    SurfaceLabel node sets of a volume mesh, transferred from a labelled surface.
    Apex labels hold a single node each and are removed from the surface set they sit on.
    """

    def __init__(self, volume, label_map):
        self.volume = volume
        self.label_map = label_map
        self.node_labels, apices = surface_node_labels(volume, label_map)
        self.sets = label_node_sets(self.node_labels)
        self.apex = apices
        for key, label in (("lv", SurfaceLabel.ApexLV), ("rv", SurfaceLabel.ApexRV)):
            node = apices[key]
            if node is None:
                continue
            for other in list(self.sets):
                self.sets[other] = self.sets[other][self.sets[other] != node]
            self.sets[label] = np.array([node], dtype=np.int64)

    def __contains__(self, label):
        return label in self.sets and self.sets[label].size > 0

    def nodes(self, *labels):
        parts = [self.sets[l] for l in labels if l in self]
        return np.unique(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)

    def spec(self, values, name="field"):
        """
        DirichletSpec from {SurfaceLabel or tuple of labels: value}.
        Raises MissingLabel naming the first label without nodes.
        """
        bc = DirichletSpec()
        for labels, value in values.items():
            labels = labels if isinstance(labels, tuple) else (labels,)
            missing = [l.name for l in labels if l not in self]
            if missing:
                raise MissingLabel("field %s needs %s on the volume boundary" % (name, ", ".join(missing)),
                                   report={"field": name, "missing": missing})
            bc.add("+".join(l.name for l in labels), self.nodes(*labels), value)
        return bc

    def summary(self):
        return {SurfaceLabel(l).name: int(n.size) for l, n in sorted(self.sets.items())}
