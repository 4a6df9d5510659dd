"""
Named experiment sweeps: every point of a parameter grid is run for every seed, each run writes
its metrics and agent tables, and one summary row per point aggregates the seeds.
"""
import dataclasses
import itertools
import logging
import os
import typing as th
from concurrent.futures import ProcessPoolExecutor

import pandas as pd
from tqdm import tqdm

from . import reports
from .allocators import ALLOCATORS
from .config import ScenarioConfig, parse_config
from .core import lookup
from .engine import run_simulation
from .errors import LeobanditError, SweepError, UnknownNameError

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class ExperimentPreset:
    """
    Args:
        name (str): Identifier, also the prefix of every file the preset writes.
        sweep (dict): Parameter name -> values; the grid is their cartesian product.
        seeds (tuple): Seeds every point is run with.
        scale (str): Default scale of the preset.
        base (dict): Values shared by every point.
        description (str): One line summary.
    """

    name: str
    sweep: th.Mapping[str, th.Sequence[th.Any]]
    seeds: th.Tuple[int, ...] = (0, 1, 2, 3, 4)
    scale: str = "desk"
    base: th.Mapping[str, th.Any] = dataclasses.field(default_factory=dict)
    description: str = ""

    def points(self) -> th.List[th.Dict[str, th.Any]]:
        keys = list(self.sweep)
        return [dict(zip(keys, values)) for values in itertools.product(*(self.sweep[key] for key in keys))]


PRESETS: th.Dict[str, ExperimentPreset] = {
    preset.name: preset
    for preset in (
        ExperimentPreset(
            "fig3-epsilon",
            sweep={"epsilon": (0.2, 0.5, 0.8)},
            description="convergence of the total throughput for different exploration thresholds",
        ),
        ExperimentPreset(
            "fig4-height",
            sweep={
                "altitude_km": (600.0, 800.0, 1000.0, 1200.0, 1500.0),
                "beam_radius_km": (30.0, 50.0, 100.0, 150.0),
                "beam_allocation": (True, False),
            },
            seeds=(0, 1, 2),
            description="throughput against satellite altitude with and without beam allocation",
        ),
        ExperimentPreset(
            "fig4-users",
            sweep={
                "n_users": (20, 30, 40, 50, 60),
                "beam_radius_km": (30.0, 50.0, 100.0, 150.0),
                "beam_allocation": (True, False),
            },
            seeds=(0, 1, 2),
            description="throughput against the number of users with and without beam allocation",
        ),
        ExperimentPreset(
            "fig5-topology",
            # half and one desk serving radius (137 km) apart, like 250/500 km against a 500 km radius
            sweep={
                "n_satellites": (2, 4),
                "orbit_topology": ("homogeneous", "heterogeneous"),
                "inter_sat_distance_km": (70.0, 140.0),
            },
            description="throughput of near and far satellites on shared and crossing orbital planes",
        ),
        ExperimentPreset(
            "fig6-baselines",
            sweep={"allocator": tuple(ALLOCATORS), "n_users": (20, 40)},
            description="the hierarchical bandit against random allocation and resource-scope ablations",
        ),
        ExperimentPreset(
            "table3-outage",
            sweep={
                "beam_radius_km": (30.0, 50.0, 100.0, 150.0),
                "n_users": (20, 40, 60),
                "beam_allocation": (True, False),
            },
            description="user outage probability with and without beam allocation",
        ),
    )
}


def resolve_preset(name: str) -> ExperimentPreset:
    preset = lookup(name, context=PRESETS, strict=False)
    if not isinstance(preset, ExperimentPreset):
        raise UnknownNameError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return preset


def run_stem(preset: str, point: th.Mapping[str, th.Any], seed: int) -> str:
    parts = [f"{key}={value:g}" if isinstance(value, float) else f"{key}={value}" for key, value in point.items()]
    return "_".join([preset, *parts, f"seed{seed}"])


def _run_job(job: th.Tuple[str, th.Dict[str, th.Any], int, ScenarioConfig, str]) -> dict:
    preset, point, seed, config, out_dir = job
    try:
        result = run_simulation(config)
    except LeobanditError as e:
        raise SweepError(point, seed, str(e)) from e
    stem = run_stem(preset, point, seed)
    metrics_path, _ = reports.write_run(result, out_dir, stem)
    return {
        "mean_total": result.summary.mean_total,
        "outage_probability": result.summary.outage_probability,
        "mean_outage_rate": result.summary.mean_outage_rate,
        "run": os.path.basename(metrics_path),
    }


def expand(
    preset: ExperimentPreset,
    scale: th.Optional[str] = None,
    path: th.Optional[str] = None,
    overrides: th.Optional[th.Mapping[str, th.Any]] = None,
    environ: th.Optional[th.Mapping[str, str]] = None,
    seeds: th.Optional[th.Sequence[int]] = None,
) -> th.List[th.Tuple[th.Dict[str, th.Any], int, ScenarioConfig]]:
    """
    Build the configuration of every (point, seed) run before anything is executed.

    Swept values take precedence over every other source; the remaining fields follow the
    usual order (scale, preset base, file, environment, overrides).

    Raises:
        ConfigurationError: If some point does not expand to a valid configuration.
    """
    scale = scale or preset.scale
    runs = []
    for point in preset.points():
        for seed in seeds if seeds is not None else preset.seeds:
            merged = dict(overrides or {})
            merged.update(point)
            merged["seed"] = seed
            config = parse_config(path, overrides=merged, environ=environ, scale=scale, base=preset.base)
            runs.append((point, seed, config))
    return runs


def run_preset(
    name: str,
    out_dir: str,
    jobs: int = 1,
    scale: th.Optional[str] = None,
    path: th.Optional[str] = None,
    overrides: th.Optional[th.Mapping[str, th.Any]] = None,
    environ: th.Optional[th.Mapping[str, str]] = None,
    seeds: th.Optional[th.Sequence[int]] = None,
    progress: bool = False,
) -> str:
    """
    Run every point of a preset for every seed and write the summary CSV.

    Results are collected in sweep order, so the files written do not depend on `jobs`.

    Args:
        name (str): Preset name.
        out_dir (str): Directory receiving the per-run CSVs and `<name>_summary.csv`.
        jobs (int): Number of worker processes.
        scale (str): Scale overriding the preset's.
        path (str): Optional configuration file applied to every run.
        overrides (dict): Field overrides applied to every run.
        environ (dict): Environment to read `LEOBANDIT_*` overrides from.
        seeds (list): Seeds overriding the preset's.
        progress (bool): Show a progress bar over the runs.

    Returns:
        str: Path of the summary CSV.

    Raises:
        UnknownNameError: For an unknown preset (nothing is written).
        ConfigurationError: If a sweep point is invalid (nothing is written).
        SweepError: If a run fails.
    """
    preset = resolve_preset(name)
    runs = expand(preset, scale=scale, path=path, overrides=overrides, environ=environ, seeds=seeds)
    logger.info("preset %s: %d points, %d runs", preset.name, len(preset.points()), len(runs))
    job_list = [(preset.name, point, seed, config, out_dir) for point, seed, config in runs]
    bar = tqdm(total=len(job_list), desc=preset.name, disable=not progress)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            outcomes = []
            for outcome in executor.map(_run_job, job_list):
                outcomes.append(outcome)
                bar.update()
    else:
        outcomes = []
        for job in job_list:
            outcomes.append(_run_job(job))
            bar.update()
    bar.close()

    rows = []
    for index, point in enumerate(preset.points()):
        n_seeds = len(runs) // len(preset.points())
        rows.append(reports.summary_row(point, outcomes[index * n_seeds : (index + 1) * n_seeds]))
    columns = list(preset.sweep) + reports.SUMMARY_COLUMNS
    return reports.write_csv(pd.DataFrame(rows, columns=columns), os.path.join(out_dir, f"{preset.name}_summary.csv"))
