"""Tidy CSV outputs of runs, agent tables, preset summaries and arm catalogs."""
import logging
import os
import typing as th

import numpy as np
import pandas as pd

from .action_space import RESOURCES, ArmCatalog
from .engine import IterationMetrics, SimulationResult

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["agent", "arm", "summary", "value", "count"]
SUMMARY_COLUMNS = [
    "mean_R_tot_bps",
    "std_R_tot_bps",
    "outage_probability",
    "std_outage_probability",
    "mean_outage_rate",
    "n_seeds",
    "runs",
]


def metrics_frame(metrics: th.Sequence[IterationMetrics], n_satellites: int) -> pd.DataFrame:
    columns = ["t", "R_tot_bps"] + [f"R_{n + 1}_bps" for n in range(n_satellites)] + ["outage_rate", "epsilon"]
    columns += [f"arm_{n + 1}_{resource}" for n in range(n_satellites) for resource in RESOURCES]
    rows = []
    for m in metrics:
        row = [m.t, m.total, *m.per_leo.tolist(), m.outage_rate, m.epsilon]
        row += [int(index) for triple in m.arms for index in triple]
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def table_frame(result: SimulationResult) -> pd.DataFrame:
    return pd.DataFrame(list(result.table_records()), columns=TABLE_COLUMNS)


def catalog_frame(catalog: ArmCatalog, head: int = 5) -> pd.DataFrame:
    """Arm counts and complexity orders of a catalog, followed by the first arms of every pool."""
    rows = [{"section": "size", "name": resource, "value": catalog.size(resource)} for resource in RESOURCES]
    rows += [{"section": "complexity", "name": name, "value": value} for name, value in catalog.complexity_orders().items()]
    for resource in RESOURCES:
        for index in range(min(head, catalog.size(resource))):
            rows.append({"section": resource, "name": index, "value": catalog.describe(resource, index)})
    return pd.DataFrame(rows, columns=["section", "name", "value"])


def write_csv(frame: pd.DataFrame, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def write_run(result: SimulationResult, out_dir: str, stem: str = "run") -> th.Tuple[str, str]:
    """
    Write the metrics and the final agent tables of a run.

    Returns:
        (str, str): Paths of the metrics CSV and of the table dump.
    """
    n_satellites = len(result.metrics[0].per_leo) if result.metrics else result.config.n_satellites
    metrics_path = write_csv(metrics_frame(result.metrics, n_satellites), os.path.join(out_dir, f"{stem}.csv"))
    tables_path = write_csv(table_frame(result), os.path.join(out_dir, f"{stem}_tables.csv"))
    return metrics_path, tables_path


def summary_row(point: th.Mapping[str, th.Any], results: th.Sequence[dict]) -> dict:
    """
    Aggregate the per-seed summaries of one sweep point.

    Args:
        point (dict): Swept parameter values.
        results (list of dict): One dict per seed with `mean_total`, `outage_probability`,
            `mean_outage_rate` and `run` (metrics file name).
    """
    totals = np.array([r["mean_total"] for r in results], dtype=float)
    outages = np.array([r["outage_probability"] for r in results], dtype=float)
    row = dict(point)
    row.update(
        mean_R_tot_bps=float(totals.mean()),
        std_R_tot_bps=float(totals.std()),
        outage_probability=float(outages.mean()),
        std_outage_probability=float(outages.std()),
        mean_outage_rate=float(np.mean([r["mean_outage_rate"] for r in results])),
        n_seeds=len(results),
        runs=";".join(r["run"] for r in results),
    )
    return row
