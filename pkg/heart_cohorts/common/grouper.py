import numpy as np

from heart_cohorts.common.utils import get_counts


class Grouper:
    """
    Maps per-item metadata rows (cases, faces) to integer group ids so that metrics
    can be reported per group, e.g. pipeline success per geometry kind.
    """

    @property
    def n_groups(self):
        return self._n_groups

    def metadata_to_group(self, metadata, return_counts=False):
        raise NotImplementedError

    def group_str(self, group):
        """Readable name of a group, e.g. 'kind = cut'."""
        raise NotImplementedError

    def group_field_str(self, group):
        """Name of a group usable as a results key, e.g. 'kind:cut'."""
        return self.group_str(group).replace(' = ', ':').replace(', ', '_')


class CombinatorialGrouper(Grouper):
    """
    One group per combination of the values of `groupby_fields`.
    Args:
        - meta_fields (list): names of the metadata columns
        - meta_map (dict): field -> list of value names (index = integer code), optional
        - meta_array (ndarray): [n x d] integer codes
        - groupby_fields (list): fields to combine; None puts every item in one group
    """

    def __init__(self, meta_fields, meta_map, meta_array, groupby_fields):
        self.groupby_fields = None if groupby_fields is None else list(groupby_fields)
        self.metadata_map = dict(meta_map or {})
        if self.groupby_fields is None:
            self._n_groups = 1
            return

        missing = [f for f in self.groupby_fields if f not in meta_fields]
        if missing:
            raise ValueError("group fields %s not in metadata fields %s" % (missing, list(meta_fields)))
        self.groupby_field_indices = [list(meta_fields).index(f) for f in self.groupby_fields]

        codes = np.asarray(meta_array)
        codes = codes.reshape(len(codes), -1)[:, self.groupby_field_indices]
        if codes.size and not np.array_equal(codes, codes.astype(np.int64)):
            raise ValueError("group metadata must hold integer codes")
        codes = codes.astype(np.int64)
        if codes.size and codes.min() < 0:
            raise ValueError("group metadata codes must be non-negative")

        # a field's cardinality covers both its observed codes and its named values
        cardinality = []
        for i, f in enumerate(self.groupby_fields):
            observed = int(codes[:, i].max()) + 1 if codes.size else 1
            cardinality.append(max(observed, len(self.metadata_map.get(f, ()))))
        self.cardinality = np.asarray(cardinality, dtype=np.int64)
        cumprod = np.cumprod(self.cardinality)
        self._n_groups = int(cumprod[-1])
        self.factors = np.concatenate(([1], cumprod[:-1])).astype(np.int64)

    def metadata_to_group(self, metadata, return_counts=False):
        """
        Args:
            - metadata (ndarray): [n x d] integer codes, same columns as at construction
        Output:
            - groups (ndarray): group id per row
            - counts (ndarray): rows per group, when `return_counts`
        """
        metadata = np.asarray(metadata)
        metadata = metadata.reshape(len(metadata), -1)
        if self.groupby_fields is None:
            groups = np.zeros(metadata.shape[0], dtype=np.int64)
        else:
            groups = metadata[:, self.groupby_field_indices].astype(np.int64) @ self.factors
        if return_counts:
            return groups, get_counts(groups, self._n_groups)
        return groups

    def group_str(self, group):
        if self.groupby_fields is None:
            return 'all'
        parts = []
        for f, factor, card in zip(self.groupby_fields, self.factors, self.cardinality):
            code = (int(group) // int(factor)) % int(card)
            names = self.metadata_map.get(f)
            value = names[code] if names is not None and code < len(names) else code
            parts.append(f'{f} = {value}')
        return ', '.join(reversed(parts))
