"""
Named, independent random streams derived from one master seed

Every stream is a numpy Generator seeded from SeedSequence(master_seed,
spawn_key=(stream, relay)). A stream therefore depends only on the master seed
and its name, never on which other streams were drawn from first. Channel
draws are pre-generated per slot so that two policies run under the same plan
see the same A/W outcome for every (relay, slot) pair.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, Tuple

import numpy as np

CHUNK_SLOTS = 1 << 16


class Stream(IntEnum):
    POLICY_TIES = 0
    CHANNEL_A = 1
    CHANNEL_W = 2


@dataclass(frozen=True)
class RngPlan:
    master_seed: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")

    def generator(self, stream: Stream, relay: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(stream), int(relay)))
        return np.random.default_rng(seq)

    def policy_ties(self) -> np.random.Generator:
        return self.generator(Stream.POLICY_TIES)

    def channel_draws(self, stream: Stream, probs, T: int) -> Iterator[Tuple[int, np.ndarray]]:
        """
        Yields (first_slot, outcomes) chunks of Bernoulli outcomes

        outcomes has shape (chunk, M): column i holds relay i's channel state
        in each slot of the chunk, drawn from that relay's own stream.
        """
        probs = np.asarray(probs, dtype=float)
        generators = [self.generator(stream, i) for i in range(len(probs))]
        for start in range(0, T, CHUNK_SLOTS):
            size = min(CHUNK_SLOTS, T - start)
            uniforms = np.column_stack([g.random(size) for g in generators])
            yield start, uniforms < probs
