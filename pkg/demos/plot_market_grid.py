"""
A source-by-target grid from CSV files
======================================

Write a few markets to CSV, describe them in a dataset manifest, and run
the grid experiment that produces heat maps and per-target correlations.
The same files can be fed to the command line tool::

    xferfolio experiment --manifest datasets.json --reps 20 --out results
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from xferfolio.data_io import (
    SyntheticMarketSpec,
    generate_synthetic_pair,
    load_manifest,
    random_regime,
    save_returns_csv,
)
from xferfolio.experiments import (
    ExperimentConfig,
    correlation_table,
    group_records,
    heatmap_csv,
    run_repeated,
    summarize_grid,
)

work = Path(tempfile.mkdtemp())
rng = np.random.default_rng(3)
mu0, sigma0 = random_regime(rng, 8)

# one target market and three sources of decreasing similarity
entries = []
for k, similarity in enumerate([0.9, 0.5, 0.1]):
    spec = SyntheticMarketSpec(8, mu0, sigma0, similarity, 2520, seed=k)
    source, train, test = generate_synthetic_pair(spec)
    label = f"src{k}"
    save_returns_csv(source, work / f"{label}.csv")
    entries.append({"label": label, "frequency": "1-day", "path": f"{label}.csv", "role": "source_train"})
    if k == 0:
        save_returns_csv(train, work / "target_train.csv")
        save_returns_csv(test, work / "target_test.csv")
        entries += [{"label": "home", "frequency": "1-day", "path": "target_train.csv", "role": "target_train"},
                    {"label": "home", "frequency": "1-day", "path": "target_test.csv", "role": "target_test"}]
(work / "datasets.json").write_text(json.dumps({"datasets": entries}, indent=2))

data = load_manifest(work / "datasets.json")
cfg = ExperimentConfig(n_repetitions=10, n_assets=4, seed=1)
records = []
for src in data["source_train"].values():
    records += run_repeated(src, data["target_train"]["home"], data["target_test"]["home"], cfg)

summary = summarize_grid(group_records(records))
print(heatmap_csv(summary, "risk"))
print(correlation_table(summary))
