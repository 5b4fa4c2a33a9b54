"""CSV and JSON exports for increment samples and estimate reports."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

INCREMENT_HEADER = ["tau_inc", "rho_inc", "seed"]


def write_increments_csv(sample, path, overwrite: bool = False) -> Path:
    path = Path(path)
    with open(path, "w" if overwrite else "x", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(INCREMENT_HEADER)
        seeds = sample.seeds if sample.seeds is not None else np.full(sample.size, -1)
        for row in zip(sample.tau_inc.tolist(), sample.rho_inc.tolist(), seeds.tolist()):
            w.writerow(row)
    return path


def read_increments_csv(path):
    from .detect import IncrementSample

    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    return IncrementSample(data[:, 0], data[:, 1], np.full(len(data), np.nan), data[:, 2])


def report_json(report, **params) -> str:
    d = report.to_dict()
    d["params"] = {**d.get("params", {}), **params}
    return json.dumps(d, indent=2, sort_keys=True)
