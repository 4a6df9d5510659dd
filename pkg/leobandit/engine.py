"""
The allocation loop: propagate the constellation, let every satellite's agents pick arms,
decode and evaluate the joint policy once for the whole network, feed the rates back and
record the metrics of the iteration.
"""
import dataclasses
import logging
import math
import typing as th

import numpy as np
from tqdm import tqdm

from . import streams
from .action_space import ArmCatalog, ArmTriple, build_catalog, decode
from .allocators import BASELINES, Allocator, make_allocator, resolve_allocator
from .channel import LinkEnvironment, rates, shadowing_db
from .config import ScenarioConfig
from .errors import SimulationError, UnknownNameError
from .geometry import NetworkSnapshot, build_constellation, propagate

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class IterationMetrics:
    """
    What one iteration produced.

    Attributes:
        t: Iteration index (1-based).
        per_leo: R_n of every satellite in bit/s.
        total: R_tot in bit/s, the sum of `per_leo`.
        per_user: Throughput of every user in bit/s.
        outage: Whether each user's throughput is below the outage threshold.
        arms: The (power, beam, channel) arms every satellite played.
        epsilon: Exploration threshold the agents used.
    """

    t: int
    per_leo: np.ndarray
    total: float
    per_user: np.ndarray
    outage: np.ndarray
    arms: th.Tuple[ArmTriple, ...]
    epsilon: float

    @property
    def outage_rate(self) -> float:
        return float(self.outage.mean()) if self.outage.size else 0.0


@dataclasses.dataclass(frozen=True)
class RunSummary:
    """
    Statistics over the trailing window of a run.

    Attributes:
        window: Number of iterations summarised.
        mean_total: Mean R_tot (bit/s).
        outage_probability: Fraction of users whose mean throughput over the window is below
            the threshold.
        mean_outage_rate: Mean of the per-iteration outage rates.
    """

    window: int
    mean_total: float
    outage_probability: float
    mean_outage_rate: float


@dataclasses.dataclass
class SimulationResult:
    config: ScenarioConfig
    allocator: Allocator
    catalog: ArmCatalog
    metrics: th.List[IterationMetrics]
    summary: RunSummary

    @property
    def tables(self):
        return self.allocator.tables()

    def table_records(self) -> th.Iterator[dict]:
        """One record per arm of every agent table, with a readable summary of the arm."""
        for label, table in self.tables.items():
            yield from table.records(lambda arm, label=label: self.allocator.describe(label, arm))


class SimulationState:
    """
    Everything a run carries from one iteration to the next.

    Args:
        config (ScenarioConfig): The scenario; allocators that fix the beams adjust it.
        allocator (str or type): Allocator name, import path or class (default: config.allocator).
    """

    def __init__(self, config: ScenarioConfig, allocator: th.Union[str, th.Type[Allocator], None] = None):
        allocator = allocator or config.allocator
        factory = resolve_allocator(allocator) if isinstance(allocator, str) else allocator
        adjust = getattr(factory, "adjust_config", None)
        self.config = adjust(config) if adjust is not None else config
        self.initial: NetworkSnapshot = build_constellation(self.config)
        self.snapshot = self.initial
        self.catalog = build_catalog(self.config)
        self.shadow = shadowing_db(self.config, self.initial.n_satellites, self.initial.n_users)
        self.allocator = make_allocator(factory, self.config, self.catalog, self.initial.n_satellites)
        self.rng = streams.make_rng(self.config.seed, streams.AGENTS)


def run_iteration(state: SimulationState, t: int) -> IterationMetrics:
    """
    One allocation-feedback round.

    Every satellite selects its arms from the tables as they stood at the end of the previous
    iteration; the rates of the joint policy are evaluated once and only then fed back.

    Args:
        state (SimulationState): The run state (updated in place).
        t (int): Iteration index.

    Returns:
        IterationMetrics: The metrics of the iteration.

    Raises:
        SimulationError: If propagation, decoding or evaluation fails.
    """
    config = state.config
    try:
        state.snapshot = propagate(state.initial, config, t)
        arms = tuple(state.allocator.select(state.rng))
        policy = decode(arms, state.snapshot, state.catalog, config)
        report = rates(LinkEnvironment.build(state.snapshot, config, state.shadow), policy)
    except (ValueError, ArithmeticError, IndexError) as e:
        raise SimulationError(t, str(e)) from e
    state.allocator.feedback(arms, tuple(float(rate) for rate in report.per_leo), report.total)
    return IterationMetrics(
        t=t,
        per_leo=report.per_leo,
        total=report.total,
        per_user=report.per_user,
        outage=report.per_user < config.outage_threshold_bps,
        arms=arms,
        epsilon=state.allocator.epsilon,
    )


def summarize(metrics: th.Sequence[IterationMetrics], config: ScenarioConfig) -> RunSummary:
    """Trailing-window statistics of a metrics series (NaN when there is nothing to summarise)."""
    window = list(metrics[-config.window:]) if config.window else []
    if not window:
        return RunSummary(window=0, mean_total=math.nan, outage_probability=math.nan, mean_outage_rate=math.nan)
    per_user = np.mean([m.per_user for m in window], axis=0)
    return RunSummary(
        window=len(window),
        mean_total=float(np.mean([m.total for m in window])),
        outage_probability=float(np.mean(per_user < config.outage_threshold_bps)) if per_user.size else 0.0,
        mean_outage_rate=float(np.mean([m.outage_rate for m in window])),
    )


def run_simulation(
    config: ScenarioConfig,
    allocator: th.Union[str, th.Type[Allocator], None] = None,
    progress: bool = False,
) -> SimulationResult:
    """
    Run `config.iterations` iterations of the allocation loop.

    Args:
        config (ScenarioConfig): The scenario.
        allocator (str or type): Allocator to use instead of `config.allocator`.
        progress (bool): Show a progress bar.

    Returns:
        SimulationResult: The metrics series, the final agent tables and the run summary.

    Raises:
        SimulationError: If an iteration fails.
        UnknownNameError: If the allocator cannot be resolved.
    """
    state = SimulationState(config, allocator)
    config = state.config
    logger.info(
        "running %s: N=%d U=%d T=%d epsilon=%g seed=%d",
        state.allocator.name or type(state.allocator).__name__,
        state.initial.n_satellites,
        state.initial.n_users,
        config.iterations,
        config.epsilon,
        config.seed,
    )
    metrics = []
    iterations = range(1, config.iterations + 1)
    for t in tqdm(iterations, desc=f"seed {config.seed}", disable=not progress, leave=False):
        metrics.append(run_iteration(state, t))
        if t % config.log_every == 0:
            logger.debug("t=%d R_tot=%.6g bit/s outage=%.3f", t, metrics[-1].total, metrics[-1].outage_rate)
    summary = summarize(metrics, config)
    logger.info(
        "done: mean R_tot %.6g bit/s, outage probability %.3f over the last %d iterations",
        summary.mean_total,
        summary.outage_probability,
        summary.window,
    )
    return SimulationResult(
        config=config, allocator=state.allocator, catalog=state.catalog, metrics=metrics, summary=summary
    )


def run_baseline(config: ScenarioConfig, kind: str, progress: bool = False) -> SimulationResult:
    """
    Run one of the comparison allocators.

    Args:
        config (ScenarioConfig): The scenario.
        kind (str): One of `BASELINES`.
        progress (bool): Show a progress bar.

    Raises:
        UnknownNameError: If `kind` is not a baseline.
    """
    if kind not in BASELINES:
        raise UnknownNameError(f"unknown baseline {kind!r}; expected one of {', '.join(BASELINES)}")
    return run_simulation(config, allocator=kind, progress=progress)
