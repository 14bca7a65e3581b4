"""
Base relay-selection policy with the shared tie-breaking rule
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core.model import RelayParams
from ..core.whittle import IndexTable


@dataclass
class PolicyContext:
    """Everything a policy may look at in one slot"""

    slot: int
    queues: np.ndarray
    params: Sequence[RelayParams]
    rng_stream: np.random.Generator
    index_tables: Optional[Sequence[IndexTable]] = None

    @property
    def M(self) -> int:
        return len(self.params)


def pick_uniform(candidates: np.ndarray, rng: np.random.Generator) -> int:
    """Uniform choice among tied relays; a lone candidate consumes no randomness"""
    if len(candidates) == 1:
        return int(candidates[0])
    return int(candidates[rng.integers(len(candidates))])


def argmin_uniform(scores: np.ndarray, rng: np.random.Generator) -> int:
    return pick_uniform(np.flatnonzero(scores == scores.min()), rng)


def argmax_uniform(scores: np.ndarray, rng: np.random.Generator) -> int:
    return pick_uniform(np.flatnonzero(scores == scores.max()), rng)


class BasePolicy:
    """
    A relay-selection rule

    Subclasses implement select(). Every call returns exactly one relay index
    and draws randomness only from ctx.rng_stream.
    """

    name = "base"

    def prepare(self, params: Sequence[RelayParams]) -> None:
        """Hook run once before a simulation starts"""

    def select(self, ctx: PolicyContext) -> int:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"
