import os
import sys
from multiprocessing import Pool

import pandas as pd
import progressbar
from tqdm import tqdm

from heart_cohorts.cohorts.cohort import PhantomCohort, write_manifest
from heart_cohorts.phantoms.phantom import make_phantom
from heart_cohorts.phantoms.perturb import cohort_augmentor

N_CASES = 20
SEED = 0
KINDS = ("full", "cut")
NOISE = 0.0


def one_case(sample):
    params, kind, noise, case_id, out_dir = sample
    phantom = make_phantom(params, kind)
    surface = phantom.surface
    if noise > 0:
        surface = cohort_augmentor(params.seed, noise=noise)(surface)
    path = os.path.join(out_dir, f"{case_id}.vtk")
    try:
        surface.to_file(path)
        phantom.labels.to_mesh().to_file(os.path.join(out_dir, f"{case_id}_labels.vtk"))
    except OSError as excp:
        print(f"Exception accured at one_case: {excp}")
        return None
    return {"case_id": case_id, "surfaces": [os.path.basename(path)], "kind": kind}


def process_cohort(out_dir, n_cases=N_CASES, seed=SEED, kinds=KINDS, noise=NOISE):
    os.makedirs(out_dir, exist_ok=True)
    cohort = PhantomCohort(n_cases, seed=seed, kinds=kinds, noise=noise, data_dir=out_dir)
    samples = [(cohort.params[i], cohort.kind_of(i), noise, cohort.case_ids[i], out_dir) for i in range(len(cohort))]

    pool = Pool()
    items = []
    pbar = progressbar.ProgressBar(max_value=len(samples))
    for i, item in enumerate(pool.imap_unordered(one_case, samples)):
        if item is not None:
            items.append(item)
        pbar.update(i)
    pbar.update(len(samples))
    pool.close()
    pool.join()

    items = sorted(items, key=lambda item: item["case_id"])
    manifest = os.path.join(out_dir, f"phantoms-{seed}.json")
    write_manifest(items, manifest)

    rows = []
    for case_id, params in tqdm(zip(cohort.case_ids, cohort.params), total=len(cohort)):
        row = {"case_id": case_id}
        row.update(params.as_dict())
        rows.append(row)
    pd.DataFrame(rows).to_csv(os.path.join(out_dir, f"phantoms-{seed}-params.csv"), index=False)
    return manifest


if __name__ == "__main__":
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "phantom-cohort"
    n_cases = int(sys.argv[2]) if len(sys.argv) > 2 else N_CASES
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else SEED
    print(process_cohort(out_dir, n_cases, seed))
