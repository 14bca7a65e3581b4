"""
Baseline relay-selection policies: Random, Load-based, MMRS and MLRS
"""

from typing import Optional, Sequence

import numpy as np

from ..core.model import RelayParams
from .base_policy import BasePolicy, PolicyContext, argmax_uniform, argmin_uniform


def select_random(ctx: PolicyContext) -> int:
    """Uniform over all M relays, independently every slot"""
    return int(ctx.rng_stream.integers(ctx.M))


def select_load_based(ctx: PolicyContext) -> int:
    """Relay with the shortest queue"""
    return argmin_uniform(np.asarray(ctx.queues), ctx.rng_stream)


def min_link_quality(params: Sequence[RelayParams]) -> np.ndarray:
    return np.array([min(p.f, p.l) for p in params])


def select_mmrs(ctx: PolicyContext) -> int:
    """Relay whose weaker hop is the strongest"""
    return argmax_uniform(min_link_quality(ctx.params), ctx.rng_stream)


def select_mlrs(ctx: PolicyContext) -> int:
    """Relay with the largest queue length times second-hop success probability"""
    l = np.array([p.l for p in ctx.params])
    return argmax_uniform(np.asarray(ctx.queues) * l, ctx.rng_stream)


class RandomPolicy(BasePolicy):
    name = "random"

    def select(self, ctx: PolicyContext) -> int:
        return select_random(ctx)


class LoadBasedPolicy(BasePolicy):
    name = "load"

    def select(self, ctx: PolicyContext) -> int:
        return select_load_based(ctx)


class MMRSPolicy(BasePolicy):
    """State-independent: the same tied set every slot"""

    name = "mmrs"

    def __init__(self):
        self._quality: Optional[np.ndarray] = None

    def prepare(self, params: Sequence[RelayParams]) -> None:
        self._quality = min_link_quality(params)

    def select(self, ctx: PolicyContext) -> int:
        if self._quality is None or len(self._quality) != ctx.M:
            self.prepare(ctx.params)
        return argmax_uniform(self._quality, ctx.rng_stream)


class MLRSPolicy(BasePolicy):
    name = "mlrs"

    def __init__(self):
        self._l: Optional[np.ndarray] = None

    def prepare(self, params: Sequence[RelayParams]) -> None:
        self._l = np.array([p.l for p in params])

    def select(self, ctx: PolicyContext) -> int:
        if self._l is None or len(self._l) != ctx.M:
            self.prepare(ctx.params)
        return argmax_uniform(np.asarray(ctx.queues) * self._l, ctx.rng_stream)
