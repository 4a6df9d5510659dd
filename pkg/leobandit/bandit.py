"""
Bandit tables of the hierarchical agents and their epsilon-greedy selection and update rules.

Values start at 0 with count 0. An update first increments the arm's count N, then moves its
value by (1 / N) * [reward + gamma * (max_a' value[a'] - value[arm])], the max being read before
the write. The tables only ever see arm indices and rewards.
"""
import logging
import typing as th

import numpy as np

logger = logging.getLogger(__name__)

MACRO = "macro"


class BanditTable:
    """
    Value estimates and pull counts of one micro-agent over a fixed pool of arms.

    Args:
        n_arms (int): Size of the arm pool.
        gamma (float): Weight of the optimistic term of the update.
        label (str): Agent identity, e.g. "leo1/power".
    """

    def __init__(self, n_arms: int, gamma: float, label: str = ""):
        self.values = np.zeros(n_arms)
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.gamma = gamma
        self.label = label

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"BanditTable({self.label!r}, arms={len(self)}, updates={int(self.counts.sum())})"

    @property
    def updates(self) -> int:
        return int(self.counts.sum())

    def best(self) -> int:
        return int(np.argmax(self.values))

    def records(self, describe: th.Optional[th.Callable[[int], str]] = None) -> th.Iterator[dict]:
        for arm in range(len(self)):
            yield {
                "agent": self.label,
                "arm": arm,
                "summary": describe(arm) if describe else "",
                "value": float(self.values[arm]),
                "count": int(self.counts[arm]),
            }


class MacroTable:
    """
    Value estimates of one satellite's assembled (power, beam, channel) triples. Only visited
    triples are stored; the others are implicitly (value 0, count 0).

    Args:
        space_size (int): Number of possible triples.
        gamma (float): Weight of the optimistic term of the update.
        label (str): Agent identity, e.g. "leo1/macro".
    """

    def __init__(self, space_size: int, gamma: float, label: str = ""):
        self.space_size = space_size
        self.gamma = gamma
        self.label = label
        self.values: th.Dict[tuple, float] = {}
        self.counts: th.Dict[tuple, int] = {}

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"MacroTable({self.label!r}, visited={len(self)}, updates={self.updates})"

    @property
    def updates(self) -> int:
        return sum(self.counts.values())

    def max_value(self) -> float:
        best = max(self.values.values(), default=0.0)
        return max(best, 0.0) if len(self.values) < self.space_size else best

    def records(self, describe: th.Optional[th.Callable[[tuple], str]] = None) -> th.Iterator[dict]:
        for key in sorted(self.values):
            yield {
                "agent": self.label,
                "arm": "/".join(str(int(part)) for part in key),
                "summary": describe(key) if describe else "",
                "value": self.values[key],
                "count": self.counts[key],
            }


def _step(value: float, count: int, best: float, reward: float, gamma: float) -> float:
    return value + (reward + gamma * (best - value)) / count


def select(table: BanditTable, epsilon: float, rng: np.random.Generator) -> int:
    """
    Epsilon-greedy selection: a uniformly random arm when a uniform draw in [0, 1) is at most
    epsilon, else the arm with the highest value (lowest index on ties).

    Args:
        table (BanditTable): The agent's table.
        epsilon (float): Exploration threshold in [0, 1].
        rng (numpy.random.Generator): Source of randomness.

    Returns:
        int: The selected arm.

    Raises:
        ValueError: If the table has no arms.
    """
    if len(table) == 0:
        raise ValueError(f"cannot select from the empty table {table.label!r}")
    if epsilon > 0.0 and rng.random() <= epsilon:
        return int(rng.integers(len(table)))
    return table.best()


def update_micro(table: BanditTable, arm: int, reward: float) -> BanditTable:
    """
    Update a micro-agent table with its satellite's rate.

    Args:
        table (BanditTable): The table (updated in place).
        arm (int): The arm that was played.
        reward (float): The (scaled) satellite rate R_n.

    Returns:
        BanditTable: The same table.
    """
    best = float(table.values.max())
    table.counts[arm] += 1
    table.values[arm] = _step(float(table.values[arm]), int(table.counts[arm]), best, reward, table.gamma)
    return table


def update_macro(table: MacroTable, assembled: tuple, reward: float) -> MacroTable:
    """
    Update a satellite's macro table with the system rate, keyed by the assembled triple.

    Args:
        table (MacroTable): The table (updated in place).
        assembled (tuple): The (power, beam, channel) arms played together.
        reward (float): The (scaled) total rate R_tot.

    Returns:
        MacroTable: The same table.
    """
    key = tuple(int(part) for part in assembled)
    best = table.max_value()
    table.counts[key] = table.counts.get(key, 0) + 1
    table.values[key] = _step(table.values.get(key, 0.0), table.counts[key], best, reward, table.gamma)
    return table
