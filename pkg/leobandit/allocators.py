"""
Allocators: who picks every satellite's (power, beam, channel) arms and how they learn.

An allocator only sees arm indices and throughput rewards: `select` returns one ArmTriple per
satellite, `feedback` receives the played arms with R_n and R_tot. The hierarchical bandit is
the learning scheme; the other entries of the registry are the baselines it is compared with.
Custom allocators can be referenced by import path, e.g. "my_allocators.Greedy".
"""
import abc
import logging
import math
import typing as th

import numpy as np

from . import streams
from .action_space import BEAM, CHANNEL, POWER, RESOURCES, ArmCatalog, ArmTriple, random_arms
from .bandit import MACRO, BanditTable, MacroTable, select, update_macro, update_micro
from .config import ScenarioConfig
from .core import call_with_accepted_kwargs, lookup
from .errors import UnknownNameError

logger = logging.getLogger(__name__)


class Allocator(abc.ABC):
    """
    Base class of allocators.

    Args:
        config (ScenarioConfig): The scenario (already adjusted by `adjust_config`).
        catalog (ArmCatalog): The arm pools.
        n_satellites (int): Number of satellites to allocate for.
    """

    name: str = ""
    # None keeps the scenario's beam allocation, False forces every cell on (fixed beams)
    beam_allocation: th.Optional[bool] = None

    def __init__(self, config: ScenarioConfig, catalog: ArmCatalog, n_satellites: int):
        self.config = config
        self.catalog = catalog
        self.n_satellites = n_satellites

    @classmethod
    def adjust_config(cls, config: ScenarioConfig) -> ScenarioConfig:
        if cls.beam_allocation is None or cls.beam_allocation == config.beam_allocation:
            return config
        return config.replace(beam_allocation=cls.beam_allocation)

    @property
    def epsilon(self) -> float:
        return self.config.epsilon

    @abc.abstractmethod
    def select(self, rng: np.random.Generator) -> th.List[ArmTriple]:
        """Arms of every satellite for the coming iteration."""

    def feedback(self, arms: th.Sequence[ArmTriple], per_leo: th.Sequence[float], total: float) -> None:
        """Throughput obtained with `arms` (bit/s)."""

    def tables(self) -> th.Dict[str, th.Union[BanditTable, MacroTable]]:
        return {}

    def describe(self, label: str, arm) -> str:
        resource = label.rsplit("/", 1)[-1]
        if resource == MACRO:
            return "; ".join(self.catalog.describe(r, a) for r, a in zip(RESOURCES, arm))
        return self.catalog.describe(resource, arm)


class RandomAllocator(Allocator):
    """Uniformly random arm triples every iteration, no learning."""

    name = "random"

    @property
    def epsilon(self) -> float:
        return 1.0

    def select(self, rng: np.random.Generator) -> th.List[ArmTriple]:
        return [random_arms(self.catalog, rng) for _ in range(self.n_satellites)]


class HierarchicalBandit(Allocator):
    """
    Per-satellite micro-agents for power, beams and channels, each an epsilon-greedy bandit
    rewarded with its own satellite's rate, plus a macro-agent per satellite rewarded with the
    system rate on the assembled triple. Resources not in `learned` stay on the catalog anchors.
    """

    name = "mmral"
    learned: th.Tuple[str, ...] = RESOURCES

    def __init__(self, config: ScenarioConfig, catalog: ArmCatalog, n_satellites: int):
        super().__init__(config, catalog, n_satellites)
        self.micro: th.Dict[th.Tuple[int, str], BanditTable] = {
            (n, resource): BanditTable(catalog.size(resource), config.gamma_micro, label=f"leo{n + 1}/{resource}")
            for n in range(n_satellites)
            for resource in self.learned
        }
        space = math.prod(catalog.size(resource) for resource in RESOURCES)
        self.macro = [MacroTable(space, config.gamma_macro, label=f"leo{n + 1}/{MACRO}") for n in range(n_satellites)]

    def select(self, rng: np.random.Generator) -> th.List[ArmTriple]:
        anchors = self.catalog.anchors
        arms = []
        for n in range(self.n_satellites):
            chosen = {
                resource: select(self.micro[n, resource], self.config.epsilon, rng)
                if resource in self.learned
                else getattr(anchors, resource)
                for resource in RESOURCES
            }
            arms.append(ArmTriple(chosen[POWER], chosen[BEAM], chosen[CHANNEL]))
        return arms

    def feedback(self, arms: th.Sequence[ArmTriple], per_leo: th.Sequence[float], total: float) -> None:
        scale = self.config.reward_scale
        for n, triple in enumerate(arms):
            for resource in self.learned:
                update_micro(self.micro[n, resource], getattr(triple, resource), per_leo[n] * scale)
            update_macro(self.macro[n], triple, total * scale)

    def tables(self) -> th.Dict[str, th.Union[BanditTable, MacroTable]]:
        tables = {table.label: table for table in self.micro.values()}
        tables.update({table.label: table for table in self.macro})
        return tables


class PowerOnly(HierarchicalBandit):
    """Learns power only; every cell illuminated, balanced channels."""

    name = "power_only"
    learned = (POWER,)
    beam_allocation = False


class ChannelOnly(HierarchicalBandit):
    """Learns channels only; every cell illuminated at the highest feasible power."""

    name = "channel_only"
    learned = (CHANNEL,)
    beam_allocation = False


class PowerChannel(HierarchicalBandit):
    """Learns power and channels; every cell illuminated."""

    name = "power_channel"
    learned = (POWER, CHANNEL)
    beam_allocation = False


class BeamChannel(HierarchicalBandit):
    """Learns beams and channels with separate agents; power fixed at the highest feasible level."""

    name = "beam_channel"
    learned = (BEAM, CHANNEL)


class JointBeamChannel(Allocator):
    """
    One agent per satellite deciding beams and channels jointly over sampled (beam, channel)
    pairs, at the highest feasible power. Mirrors joint-decision schemes with larger action spaces.
    """

    name = "full_power_beam_channel"

    def __init__(self, config: ScenarioConfig, catalog: ArmCatalog, n_satellites: int):
        super().__init__(config, catalog, n_satellites)
        n_beam, n_channel = catalog.size(BEAM), catalog.size(CHANNEL)
        if n_beam * n_channel <= config.joint_pool:
            pairs = [(b, c) for b in range(n_beam) for c in range(n_channel)]
        else:
            rng = streams.make_rng(config.seed, streams.CATALOG, 1)
            anchor = (catalog.full_beams, catalog.balanced_channel)
            flat = rng.choice(n_beam * n_channel, size=config.joint_pool, replace=False)
            pairs = [anchor] + [divmod(int(i), n_channel) for i in flat if divmod(int(i), n_channel) != anchor]
            pairs = pairs[: config.joint_pool]
        self.pairs = np.array(pairs, dtype=int)
        self.joint = [
            BanditTable(len(self.pairs), config.gamma_micro, label=f"leo{n + 1}/joint") for n in range(n_satellites)
        ]
        space = math.prod(catalog.size(resource) for resource in RESOURCES)
        self.macro = [MacroTable(space, config.gamma_macro, label=f"leo{n + 1}/{MACRO}") for n in range(n_satellites)]
        self._played: th.List[int] = []

    def select(self, rng: np.random.Generator) -> th.List[ArmTriple]:
        self._played = [select(table, self.config.epsilon, rng) for table in self.joint]
        return [ArmTriple(self.catalog.full_power, *map(int, self.pairs[index])) for index in self._played]

    def feedback(self, arms: th.Sequence[ArmTriple], per_leo: th.Sequence[float], total: float) -> None:
        scale = self.config.reward_scale
        for n, triple in enumerate(arms):
            update_micro(self.joint[n], self._played[n], per_leo[n] * scale)
            update_macro(self.macro[n], triple, total * scale)

    def tables(self) -> th.Dict[str, th.Union[BanditTable, MacroTable]]:
        tables = {table.label: table for table in self.joint}
        tables.update({table.label: table for table in self.macro})
        return tables

    def describe(self, label: str, arm) -> str:
        if label.endswith("/joint"):
            beam, channel = self.pairs[arm]
            return f"{self.catalog.describe(BEAM, beam)}; {self.catalog.describe(CHANNEL, channel)}"
        return super().describe(label, arm)


ALLOCATORS: th.Dict[str, th.Type[Allocator]] = {
    cls.name: cls
    for cls in (HierarchicalBandit, RandomAllocator, PowerOnly, ChannelOnly, PowerChannel, BeamChannel, JointBeamChannel)
}
BASELINES = tuple(name for name in ALLOCATORS if name != HierarchicalBandit.name)


def resolve_allocator(name: str) -> th.Type[Allocator]:
    """
    Resolve an allocator by registered name or import path.

    Raises:
        UnknownNameError: If nothing callable is found under that name.
    """
    allocator = lookup(name, context=ALLOCATORS, strict=False)
    if allocator is None or not callable(allocator):
        raise UnknownNameError(f"unknown allocator {name!r}; registered: {', '.join(ALLOCATORS)}")
    return allocator


def make_allocator(
    allocator: th.Union[str, th.Type[Allocator]], config: ScenarioConfig, catalog: ArmCatalog, n_satellites: int
) -> Allocator:
    """Instantiate an allocator, passing only the keyword arguments its constructor accepts."""
    factory = resolve_allocator(allocator) if isinstance(allocator, str) else allocator
    return call_with_accepted_kwargs(factory, config=config, catalog=catalog, n_satellites=n_satellites)
