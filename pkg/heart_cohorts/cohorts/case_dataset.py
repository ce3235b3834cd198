import numpy as np


class CaseDataset:
    DEFAULT_KINDS = {'full': 0, 'cut': 1}
    DEFAULT_KIND_NAMES = {'full': 'Full biventricular', 'cut': 'Cut at the base'}

    @property
    def dataset_name(self):
        """
        A string that identifies the cohort.
        """
        return self._dataset_name

    @property
    def case_ids(self):
        """
        A list of case identifiers, case_ids[i] naming the i-th case.
        """
        return self._case_ids

    @property
    def input_array(self):
        """
        A list with the inputs of each case: a dict with 'surfaces' (list of paths, one closed
        surface or the three open LV epicardium, LV endocardium and RV endocardium patches)
        and optionally 'mesh' (an imported tetrahedral mesh).
        """
        return self._input_array

    @property
    def kind_dict(self):
        """
        A dictionary mapping geometry kinds to integer identifiers (used in kind_array).
        """
        return getattr(self, '_kind_dict', CaseDataset.DEFAULT_KINDS)

    @property
    def kind_names(self):
        return getattr(self, '_kind_names', CaseDataset.DEFAULT_KIND_NAMES)

    @property
    def kind_array(self):
        """
        An array of integers, with kind_array[i] the geometry kind of the i-th case.
        """
        return self._kind_array

    @property
    def metadata_fields(self):
        """
        A list of strings naming each column of the metadata table. Must include 'kind'.
        """
        return self._metadata_fields

    @property
    def metadata_array(self):
        """
        An integer array of metadata, the i-th row holding the metadata of the i-th case.
        """
        return self._metadata_array

    @property
    def metadata_map(self):
        """
        For each metadata field, a list mapping integer codes to readable values.
        """
        return getattr(self, '_metadata_map', None)

    def get_input(self, idx):
        """
        Args:
            - idx (int): Index of a case
        Output:
            - inputs (dict): surfaces, optional mesh and kind of the idx-th case
        """
        item = dict(self.input_array[idx])
        item['case_id'] = self.case_ids[idx]
        item['kind'] = self.kind_of(idx)
        return item

    def kind_of(self, idx):
        code = int(self.kind_array[idx])
        return next(k for k, v in self.kind_dict.items() if v == code)

    def get_subset(self, kind, frac=1.0, seed=0):
        """
        Args:
            - kind (str): Geometry kind, e.g. 'full' or 'cut'. Must be in self.kind_dict.
            - frac (float): What fraction of the cases of that kind to sample.
        Output:
            - subset (CaseSubset)
        """
        if kind not in self.kind_dict:
            raise ValueError(f"Kind {kind} not found in dataset's kind_dict.")
        idx = np.where(self.kind_array == self.kind_dict[kind])[0]
        if frac < 1.0:
            num_to_retain = int(np.round(float(len(idx)) * frac))
            idx = np.sort(np.random.default_rng(seed).permutation(idx)[:num_to_retain])
        return CaseSubset(self, idx)

    def __getitem__(self, idx):
        return self.get_input(idx)

    def __len__(self):
        return len(self.case_ids)

    def __iter__(self):
        for idx in range(len(self)):
            yield self.get_input(idx)

    def __init__(self, data_dir):
        self.data_dir = data_dir
        self.check_init()

    def check_init(self):
        required_attrs = ['_dataset_name', '_case_ids', '_input_array', '_kind_array',
                          '_metadata_fields', '_metadata_array']
        for attr_name in required_attrs:
            assert hasattr(self, attr_name), f'{attr_name} is missing.'

        assert self.kind_dict.keys() == self.kind_names.keys()
        assert isinstance(self.metadata_array, np.ndarray), 'metadata_array must be a numpy array'
        assert len(self.case_ids) == len(set(self.case_ids)), 'case ids must be unique'
        assert len(self.input_array) == len(self.case_ids)
        assert len(self.kind_array) == len(self.case_ids)
        assert len(self.metadata_array) == len(self.case_ids)
        assert self.metadata_array.ndim == 2
        assert len(self.metadata_fields) == self.metadata_array.shape[1]
        assert 'kind' in self.metadata_fields

    def eval(self, statuses, grouper=None):
        """
        Success rate of a batch, overall and per group (per kind by default).
        Args:
            - statuses (list): 'ok' / 'warn' / 'fail' per case, aligned with the dataset
        Output:
            - results (dict), results_str (str)
        """
        from heart_cohorts.common.grouper import CombinatorialGrouper
        from heart_cohorts.common.metrics.mesh_metrics import Agreement

        metric = Agreement(prediction_fn=lambda s: np.asarray(s) != 'fail', name='success')
        y_true = np.ones(len(statuses), dtype=bool)
        if grouper is None:
            grouper = CombinatorialGrouper(self.metadata_fields, self.metadata_map, self.metadata_array, ['kind'])
        return self.standard_group_eval(metric, grouper, np.asarray(statuses), y_true, self.metadata_array)

    @staticmethod
    def standard_eval(metric, y_pred, y_true):
        """
        Args:
            - metric (Metric): Metric to use for eval
            - y_pred (ndarray): Predicted values
            - y_true (ndarray): True values
        Output:
            - results (dict): Dictionary of results
            - results_str (str): Pretty print version of the results
        """
        results = metric.compute(y_pred, y_true, return_dict=True)
        results_str = (
            f"Average {metric.name}: {results[metric.agg_metric_field]:.3f}\n"
        )
        return results, results_str

    @staticmethod
    def standard_group_eval(metric, grouper, y_pred, y_true, metadata, aggregate=True):
        """
        Args:
            - metric (Metric): Metric to use for eval
            - grouper (CombinatorialGrouper): Grouper object that converts metadata into groups
            - y_pred (ndarray): Predicted values
            - y_true (ndarray): True values
            - metadata (ndarray): Metadata
        Output:
            - results (dict): Dictionary of results
            - results_str (str): Pretty print version of the results
        """
        results, results_str = {}, ''
        if aggregate:
            results.update(metric.compute(y_pred, y_true))
            results_str += f"Average {metric.name}: {results[metric.agg_metric_field]:.3f}\n"

        g = grouper.metadata_to_group(metadata)
        group_results = metric.compute_group_wise(y_pred, y_true, g, grouper.n_groups)
        for group_idx in range(grouper.n_groups):
            group_str = grouper.group_field_str(group_idx)
            group_metric = group_results[metric.group_metric_field(group_idx)]
            group_counts = group_results[metric.group_count_field(group_idx)]
            results[f'{metric.name}_{group_str}'] = group_metric
            results[f'count_{group_str}'] = group_counts
            if group_counts == 0:
                continue
            results_str += (
                f'  {grouper.group_str(group_idx)}  '
                f"[n = {group_counts:6.0f}]:\t"
                f"{metric.name} = {group_metric:5.3f}\n")
        results[f'{metric.worst_group_metric_field}'] = group_results[f'{metric.worst_group_metric_field}']
        results_str += f"Worst-group {metric.name}: {group_results[metric.worst_group_metric_field]:.3f}\n"
        return results, results_str


class CaseSubset(CaseDataset):

    def __init__(self, dataset, indices):
        self.dataset = dataset
        self.indices = indices
        inherited_attrs = ['_dataset_name', '_kind_dict', '_kind_names',
                           '_metadata_fields', '_metadata_map']
        for attr_name in inherited_attrs:
            if hasattr(dataset, attr_name):
                setattr(self, attr_name, getattr(dataset, attr_name))

    @property
    def case_ids(self):
        return [self.dataset.case_ids[i] for i in self.indices]

    @property
    def input_array(self):
        return [self.dataset.input_array[i] for i in self.indices]

    @property
    def kind_array(self):
        return self.dataset.kind_array[self.indices]

    @property
    def metadata_array(self):
        return self.dataset.metadata_array[self.indices]
