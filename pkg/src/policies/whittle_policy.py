"""
Whittle index policy - the packet goes to the relay with the smallest index
"""

from typing import List, Optional, Sequence

import numpy as np

from ..core.errors import PolicyConfigError
from ..core.model import RelayParams
from ..core.whittle import IndexTable, lookup
from .base_policy import BasePolicy, PolicyContext, argmin_uniform


def _require_tables(tables: Optional[Sequence[IndexTable]], M: int) -> Sequence[IndexTable]:
    if not tables:
        raise PolicyConfigError("The whittle policy needs one index table per relay; none were given")
    if len(tables) != M:
        raise PolicyConfigError(f"The whittle policy needs {M} index tables, got {len(tables)}")
    return tables


def select_whittle(ctx: PolicyContext) -> int:
    tables = _require_tables(ctx.index_tables, ctx.M)
    indices = np.array([lookup(t, int(x)) for t, x in zip(tables, ctx.queues)])
    return argmin_uniform(indices, ctx.rng_stream)


class WhittlePolicy(BasePolicy):
    """
    Reads indices from tables expanded to every state up front

    The expanded values equal lookup() exactly, so this selects the same relay
    as select_whittle() while costing one array read per relay per slot.
    """

    name = "whittle"

    def __init__(self, tables: Optional[Sequence[IndexTable]] = None):
        self.tables = tables
        self._dense: Optional[List[np.ndarray]] = None

    def prepare(self, params: Sequence[RelayParams]) -> None:
        tables = _require_tables(self.tables, len(params))
        for i, (table, p) in enumerate(zip(tables, params)):
            if table.params.K != p.K:
                raise PolicyConfigError(
                    f"Index table for relay {i} covers K={table.params.K}, relay has K={p.K}"
                )
        self._dense = [t.dense() for t in tables]

    def select(self, ctx: PolicyContext) -> int:
        if self._dense is None:
            if ctx.index_tables is not None and self.tables is None:
                self.tables = ctx.index_tables
            self.prepare(ctx.params)
        indices = np.array([d[x] for d, x in zip(self._dense, ctx.queues)])
        return argmin_uniform(indices, ctx.rng_stream)
