"""
Discrete arm spaces of the power, beam and channel agents, decoding of arm indices into an
AllocationPolicy, and the feasibility check of the allocation constraints C1-C7.

Every satellite has `slots` beam slots (L_illum with beam allocation, all M cells without).
A beam arm fills the slots with cells, a channel arm gives every sub-channel to one slot,
and a power arm sets one power level per slot.
"""
import dataclasses
import itertools
import logging
import math
import typing as th

import numpy as np

from . import streams
from .channel import AllocationPolicy
from .config import ScenarioConfig, dbm_to_watt
from .errors import ConfigurationError
from .geometry import NetworkSnapshot

logger = logging.getLogger(__name__)

POWER, BEAM, CHANNEL = "power", "beam", "channel"
RESOURCES = (POWER, BEAM, CHANNEL)
_MAX_DRAWS = 64  # sampling attempts per requested arm before giving up on uniqueness


class ArmTriple(th.NamedTuple):
    power: int
    beam: int
    channel: int


@dataclasses.dataclass(frozen=True)
class ArmCatalog:
    """
    Immutable arm pools shared by every satellite's agents.

    Attributes:
        slots: Number of illuminated beams per satellite.
        power_arms: (K_P, slots) per-slot transmit power in W (0 for "off").
        power_levels_dbm: (K_P, slots) the same levels in dBm (-inf for "off").
        beam_arms: (K_phi, slots) cell index of every slot, ascending.
        channel_arms: (K_rho, S) slot index of every sub-channel.
        full_power: Index of the all-slots-at-max-feasible-level power arm.
        balanced_channel: Index of the balanced channel arm.
        full_beams: Index of the beam arm illuminating the first cells (all cells without beam allocation).
    """

    slots: int
    power_arms: np.ndarray
    power_levels_dbm: np.ndarray
    beam_arms: np.ndarray
    channel_arms: np.ndarray
    full_power: int
    balanced_channel: int
    full_beams: int

    def size(self, resource: str) -> int:
        return {POWER: len(self.power_arms), BEAM: len(self.beam_arms), CHANNEL: len(self.channel_arms)}[resource]

    @property
    def anchors(self) -> ArmTriple:
        return ArmTriple(self.full_power, self.full_beams, self.balanced_channel)

    def describe(self, resource: str, index: int) -> str:
        """Short human readable summary of one arm, used in table dumps."""
        if resource == POWER:
            return "/".join("off" if math.isinf(level) else f"{level:g}" for level in self.power_levels_dbm[index]) + " dBm"
        if resource == BEAM:
            return "cells " + "-".join(str(int(cell)) for cell in self.beam_arms[index])
        if resource == CHANNEL:
            blocks = np.bincount(self.channel_arms[index], minlength=self.slots)
            return "blocks " + "-".join(str(int(block)) for block in blocks)
        raise ValueError(f"unknown resource {resource!r}")

    def complexity_orders(self) -> th.Dict[str, float]:
        """
        Search-space orders: the exhaustive problem (as log10), the macro-agent product
        space and the micro-agent space.
        """
        n_power, n_beam, n_channel = (self.size(resource) for resource in RESOURCES)
        return {
            "exhaustive_log10": math.log10(n_power) + n_beam * n_channel * math.log10(2.0),
            "macro": float(n_power * n_beam * n_channel),
            "micro": float(max(n_power, n_beam, n_channel)),
        }


def _sample_unique(draw: th.Callable[[], tuple], limit: int, seed_items: th.Sequence[tuple] = ()) -> th.List[tuple]:
    items, seen = list(seed_items), set(seed_items)
    for _ in range(limit * _MAX_DRAWS):
        if len(items) >= limit:
            break
        item = draw()
        if item not in seen:
            seen.add(item)
            items.append(item)
    return items


def _beam_arms(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    n_cells, slots = config.cells_per_satellite, config.beam_slots
    if math.comb(n_cells, slots) <= config.beam_pool:
        return np.array(list(itertools.combinations(range(n_cells), slots)), dtype=int).reshape(-1, slots)
    first = tuple(range(slots))
    arms = _sample_unique(
        lambda: tuple(sorted(rng.choice(n_cells, size=slots, replace=False).tolist())), config.beam_pool, [first]
    )
    return np.array(arms, dtype=int)


def _composition_to_assignment(blocks: th.Sequence[int]) -> tuple:
    return tuple(slot for slot, block in enumerate(blocks) for _ in range(block))


def _balanced_blocks(n_subchannels: int, slots: int) -> tuple:
    base, extra = divmod(n_subchannels, slots)
    return tuple(base + (1 if slot < extra else 0) for slot in range(slots))


def _channel_arms(config: ScenarioConfig, rng: np.random.Generator) -> th.Tuple[np.ndarray, int]:
    n_sub, slots = config.n_subchannels, config.beam_slots
    balanced = _composition_to_assignment(_balanced_blocks(n_sub, slots))
    if math.comb(n_sub - 1, slots - 1) <= config.channel_pool:
        arms = []
        for cuts in itertools.combinations(range(1, n_sub), slots - 1):
            edges = (0,) + cuts + (n_sub,)
            arms.append(_composition_to_assignment([b - a for a, b in zip(edges[:-1], edges[1:])]))
    else:

        def draw():
            cuts = sorted(rng.choice(np.arange(1, n_sub), size=slots - 1, replace=False).tolist())
            edges = [0] + cuts + [n_sub]
            return _composition_to_assignment([b - a for a, b in zip(edges[:-1], edges[1:])])

        arms = _sample_unique(draw, config.channel_pool, [balanced])
    return np.array(arms, dtype=int).reshape(-1, n_sub), arms.index(balanced)


def _power_arms(config: ScenarioConfig, rng: np.random.Generator) -> th.Tuple[np.ndarray, np.ndarray]:
    slots = config.beam_slots
    levels = [config.p_beam_dbm - offset for offset in sorted(set(config.power_offsets_db))]
    if config.power_off_level:
        levels.append(-math.inf)
    watts = {level: (0.0 if math.isinf(level) else dbm_to_watt(level)) for level in levels}
    budget = config.p_leo_w * (1.0 + 1e-12)

    def feasible(vector: tuple) -> bool:
        return sum(watts[level] for level in vector) <= budget

    # highest uniform level the satellite budget allows
    anchor = next((tuple([level] * slots) for level in levels if feasible((level,) * slots)), None)
    if anchor is None:
        raise ConfigurationError(
            f"no power level fits {slots} beams into the satellite budget of {config.p_leo_dbm} dBm",
            field="p_leo_dbm",
        )
    if len(levels) ** slots <= config.power_pool:
        arms = [vector for vector in itertools.product(levels, repeat=slots) if feasible(vector)]
        arms.remove(anchor)
        arms.insert(0, anchor)
    else:

        def draw():
            vector = tuple(levels[i] for i in rng.integers(0, len(levels), size=slots))
            return vector if feasible(vector) else anchor

        arms = _sample_unique(draw, config.power_pool, [anchor])
    levels_dbm = np.array(arms, dtype=float).reshape(-1, slots)
    levels_w = np.where(np.isinf(levels_dbm), 0.0, 10.0 ** ((levels_dbm - 30.0) / 10.0))
    return levels_w, levels_dbm


def build_catalog(config: ScenarioConfig, seed: th.Optional[int] = None) -> ArmCatalog:
    """
    Build the power, beam and channel arm pools.

    Beam arms are every L_illum-subset of the M cells (sampled down to the pool cap when there
    are more), channel arms are the compositions of the S sub-channels into contiguous blocks
    over the beam slots (sampled, always keeping the balanced one), and power arms are per-slot
    levels from a dB grid below P_beam (plus "off"), filtered by the satellite budget and always
    containing the all-slots-at-the-highest-feasible-level arm.

    Args:
        config (ScenarioConfig): The scenario.
        seed (int): Seed of the pool sampling (default: config.seed).

    Returns:
        ArmCatalog: The arm pools.

    Raises:
        ConfigurationError: If some pool has no feasible arm.
    """
    slots = config.beam_slots
    if config.n_subchannels < slots:
        raise ConfigurationError(
            f"{config.n_subchannels} sub-channels cannot give each of {slots} beams one", field="n_subchannels"
        )
    rng = streams.make_rng(config.seed if seed is None else seed, streams.CATALOG)
    beam_arms = _beam_arms(config, rng)
    channel_arms, balanced = _channel_arms(config, rng)
    power_w, power_dbm = _power_arms(config, rng)
    full_set = tuple(range(slots))
    full_beams = next(i for i, arm in enumerate(beam_arms.tolist()) if tuple(arm) == full_set)
    catalog = ArmCatalog(
        slots=slots,
        power_arms=power_w,
        power_levels_dbm=power_dbm,
        beam_arms=beam_arms,
        channel_arms=channel_arms,
        full_power=0,
        balanced_channel=balanced,
        full_beams=full_beams,
    )
    for array in (catalog.power_arms, catalog.power_levels_dbm, catalog.beam_arms, catalog.channel_arms):
        array.setflags(write=False)
    logger.debug(
        "catalog: %d power, %d beam, %d channel arms over %d slots",
        len(power_w),
        len(beam_arms),
        len(channel_arms),
        slots,
    )
    return catalog


def decode(
    arms: th.Sequence[ArmTriple],
    snapshot: NetworkSnapshot,
    catalog: ArmCatalog,
    config: ScenarioConfig,
) -> AllocationPolicy:
    """
    Turn one arm triple per satellite into the joint allocation policy.

    Users of an illuminated cell share its sub-channels round-robin (sub-channel j of the cell
    goes to the j-th user, wrapping around); in cells with more users than sub-channels the user
    list starts at an offset that rotates with the iteration, so everyone is served over time.
    Every served (user, sub-channel) pair gets the slot's power level split equally over the
    slot's sub-channels. Cells without users keep their sub-channels idle.

    Args:
        arms (sequence of ArmTriple): (power, beam, channel) arm index of every satellite.
        snapshot (NetworkSnapshot): Geometry providing the cell membership kappa.
        catalog (ArmCatalog): The arm pools.
        config (ScenarioConfig): The scenario.

    Returns:
        AllocationPolicy: A policy satisfying C1-C7 by construction.
    """
    n_sat, n_cells, n_users = snapshot.kappa.shape
    policy = AllocationPolicy.empty(n_sat, n_cells, n_users, config.n_subchannels)
    for n, (power_arm, beam_arm, channel_arm) in enumerate(arms):
        cells = catalog.beam_arms[beam_arm]
        assignment = catalog.channel_arms[channel_arm]
        levels = catalog.power_arms[power_arm]
        for slot, m in enumerate(cells):
            subchannels = np.flatnonzero(assignment == slot)
            policy.rho[n, m, subchannels] = True
            users = np.flatnonzero(snapshot.kappa[n, m])
            if len(users) == 0 or len(subchannels) == 0:
                continue
            if len(users) > len(subchannels):
                users = np.roll(users, -(snapshot.t % len(users)))
            share = levels[slot] / len(subchannels)
            for j, s in enumerate(subchannels):
                u = users[j % len(users)]
                policy.phi[n, m, u] = True
                policy.power[n, m, u, s] = share
    return policy


@dataclasses.dataclass(frozen=True)
class Violation:
    constraint: str
    index: th.Tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.constraint} at {self.index}"


@dataclasses.dataclass(frozen=True)
class ValidationResult:
    violations: th.Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def constraints(self) -> th.List[str]:
        return [violation.constraint for violation in self.violations]


def _first(mask: np.ndarray) -> th.Optional[th.Tuple[int, ...]]:
    hits = np.argwhere(mask)
    return tuple(int(i) for i in hits[0]) if len(hits) else None


def validate_policy(policy: AllocationPolicy, config: ScenarioConfig) -> ValidationResult:
    """
    Check a policy against the allocation constraints.

    C1 per-satellite power in [0, P_leo]; C2 per-beam power in [0, P_beam]; C3 every user served
    by at most one beam; C4 every sub-channel of a satellite on at most one beam; C5 every served
    (n, m, u) gets between 1 and S sub-channels; C6/C7 binary indicators; POWER_GATE power only on
    served (beam, sub-channel) pairs. Budgets are closed intervals.

    Args:
        policy (AllocationPolicy): The policy to check.
        config (ScenarioConfig): Provides the budgets.

    Returns:
        ValidationResult: The first failing index of every violated constraint (empty when valid).
    """
    tolerance = 1e-12
    phi, rho, power = np.asarray(policy.phi), np.asarray(policy.rho), np.asarray(policy.power)
    checks = []

    per_leo = power.sum(axis=(1, 2, 3))
    checks.append(("C1", (per_leo < 0) | (per_leo > config.p_leo_w * (1 + tolerance)) | (power < 0).any(axis=(1, 2, 3))))
    per_beam = power.sum(axis=(2, 3))
    checks.append(("C2", (per_beam < 0) | (per_beam > config.p_beam_w * (1 + tolerance))))
    checks.append(("C3", phi.astype(int).sum(axis=(0, 1)) > 1))
    checks.append(("C4", rho.astype(int).sum(axis=1) > 1))
    phi_bool, rho_bool = phi.astype(bool), rho.astype(bool)
    links = (phi_bool[:, :, :, None] & rho_bool[:, :, None, :]).sum(axis=3)
    checks.append(("C5", phi_bool & ((links < 1) | (links > config.n_subchannels))))
    checks.append(("C6", ~np.isin(phi, (0, 1))))
    checks.append(("C7", ~np.isin(rho, (0, 1))))
    checks.append(("POWER_GATE", (power > 0) & ~(phi_bool[:, :, :, None] & rho_bool[:, :, None, :])))

    violations = []
    for constraint, mask in checks:
        index = _first(mask)
        if index is not None:
            violations.append(Violation(constraint, index))
    return ValidationResult(tuple(violations))


def random_arms(catalog: ArmCatalog, rng: np.random.Generator) -> ArmTriple:
    """A uniformly drawn arm triple."""
    return ArmTriple(
        int(rng.integers(catalog.size(POWER))),
        int(rng.integers(catalog.size(BEAM))),
        int(rng.integers(catalog.size(CHANNEL))),
    )
