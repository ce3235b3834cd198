import json
import logging
import os

import numpy as np

from heart_cohorts.cohorts.case_dataset import CaseDataset

logger = logging.getLogger(__name__)


def read_manifest(manifest_filepath):
    samples = []
    with open(manifest_filepath, 'r') as f:
        for line in f.readlines():
            if line.strip():
                samples.append(json.loads(line))
    return samples


def write_manifest(items, manifest_filepath):
    with open(manifest_filepath, 'w', newline='\n') as fout:
        for item in items:
            json.dump(item, fout, ensure_ascii=False, sort_keys=True)
            fout.write('\n')
            fout.flush()


class ManifestCohort(CaseDataset):
    """
    Cases listed in a JSON-lines manifest, one object per line:
        {"case_id": "...", "surfaces": ["..."], "mesh": "...", "kind": "full"}
    Relative paths are resolved against the manifest's directory.
    """

    def __init__(self, manifest_path, default_kind='full'):
        self._dataset_name = os.path.splitext(os.path.basename(manifest_path))[0]
        root = os.path.dirname(os.path.abspath(manifest_path))
        items = read_manifest(manifest_path)

        def resolve(path):
            return path if os.path.isabs(path) else os.path.join(root, path)

        self._case_ids, self._input_array, kinds = [], [], []
        for i, item in enumerate(items):
            case_id = str(item.get('case_id', f'case_{i:04d}'))
            kind = item.get('kind', default_kind)
            if kind not in self.kind_dict:
                raise ValueError(f"case {case_id}: kind {kind} not in {list(self.kind_dict)}")
            inputs = {'surfaces': [resolve(p) for p in item.get('surfaces', [])]}
            if item.get('mesh'):
                inputs['mesh'] = resolve(item['mesh'])
            self._case_ids.append(case_id)
            self._input_array.append(inputs)
            kinds.append(self.kind_dict[kind])
        self._kind_array = np.asarray(kinds, dtype=np.int64)
        self._metadata_fields = ['kind']
        self._metadata_map = {'kind': list(self.kind_dict)}
        self._metadata_array = self._kind_array.reshape(-1, 1)
        super().__init__(root)


class PhantomCohort(CaseDataset):
    """
    Seeded phantom parameter draws; `write(out_dir)` materialises the surfaces and a manifest.
    """

    def __init__(self, n_cases, seed=0, kinds=('full',), noise=0.0, data_dir=None, **param_overrides):
        from heart_cohorts.phantoms.phantom import PhantomParams

        self._dataset_name = f'phantoms-{seed}'
        rng = np.random.default_rng(seed)
        self.noise = noise
        self.params = [PhantomParams.sample(rng, **param_overrides) for _ in range(n_cases)]
        self._case_ids = [f'phantom_{seed}_{i:04d}' for i in range(n_cases)]
        kind_names = [kinds[i % len(kinds)] for i in range(n_cases)]
        self._kind_array = np.asarray([self.kind_dict[k] for k in kind_names], dtype=np.int64)
        self._input_array = [{'surfaces': []} for _ in range(n_cases)]
        self._metadata_fields = ['kind']
        self._metadata_map = {'kind': list(self.kind_dict)}
        self._metadata_array = self._kind_array.reshape(-1, 1)
        super().__init__(data_dir)

    def build(self, idx):
        """Surface mesh of the idx-th phantom (with vertex noise when `noise` > 0) and its phantom."""
        from heart_cohorts.phantoms.phantom import make_phantom
        from heart_cohorts.phantoms.perturb import cohort_augmentor

        phantom = make_phantom(self.params[idx], self.kind_of(idx))
        surface = phantom.surface
        if self.noise > 0:
            surface = cohort_augmentor(self.params[idx].seed, noise=self.noise)(surface)
        return surface, phantom

    def write_case(self, idx, out_dir):
        surface, _ = self.build(idx)
        path = os.path.join(out_dir, f'{self.case_ids[idx]}.vtk')
        surface.to_file(path)
        return {'case_id': self.case_ids[idx], 'surfaces': [os.path.basename(path)], 'kind': self.kind_of(idx)}

    def write(self, out_dir, manifest_name='cases.json'):
        os.makedirs(out_dir, exist_ok=True)
        items = [self.write_case(i, out_dir) for i in range(len(self))]
        manifest = os.path.join(out_dir, manifest_name)
        write_manifest(items, manifest)
        logger.info("wrote %d phantom cases to %s", len(items), out_dir)
        return manifest
