import logging

import numpy as np
import pandas as pd

from heart_cohorts.config import VariabilitySpec

logger = logging.getLogger(__name__)


def sample_variability(spec=None):
    """
    Ionic current scaling factors, one row per cell model.
    Rows are drawn uniformly within each current's range from a generator seeded with `spec.seed`.
    Row 0 is the all-ones control when every range contains 1; otherwise it is drawn like the rest,
    so every row stays inside the ranges.
    Output:
        - table (DataFrame): `sample` column plus one column per current
    """
    spec = (spec or VariabilitySpec()).validate()
    currents = list(spec.ranges)
    lo = np.array([spec.ranges[c][0] for c in currents])
    hi = np.array([spec.ranges[c][1] for c in currents])
    rng = np.random.default_rng(spec.seed)
    values = rng.uniform(lo, hi, size=(spec.n_samples, len(currents)))
    if all(low <= 1.0 <= high for low, high in spec.ranges.values()):
        values[0] = 1.0
    else:
        logger.info("a scaling range excludes 1, sample 0 is not the control")
    table = pd.DataFrame(values, columns=currents)
    table.insert(0, "sample", np.arange(spec.n_samples))
    return table


def hill_block(dose, ic50, hill=1.0):
    """Remaining conductance fraction under a drug dose (same units as `ic50`)."""
    return 1.0 / (1.0 + (np.asarray(dose, dtype=float) / ic50) ** hill)


def drug_scenarios(table, spec=None):
    """
    Crosses every sample with every dose: currents with an IC50 are scaled by their Hill block.
    Without IC50 values only the control dose is kept.
    """
    spec = (spec or VariabilitySpec()).validate()
    currents = [c for c in table.columns if c != "sample"]
    doses = sorted(set(spec.doses) | {0.0}) if spec.ic50 else [0.0]
    rows = []
    for dose in doses:
        scenario = table.copy()
        for current, ic50 in spec.ic50.items():
            scenario[current] = scenario[current] * hill_block(dose, ic50, spec.hill.get(current, 1.0))
        scenario.insert(1, "dose_uM", dose)
        rows.append(scenario)
    out = pd.concat(rows, ignore_index=True)
    out = out.sort_values(["sample", "dose_uM"], kind="mergesort").reset_index(drop=True)
    logger.info("%d samples x %d doses, blocked currents: %s", len(table), len(doses),
                ", ".join(sorted(spec.ic50)) or "none")
    return out[["sample", "dose_uM"] + currents]
