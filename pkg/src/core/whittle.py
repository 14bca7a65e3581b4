"""
Whittle indices per relay and state, and the tables the index policy reads

The index of state x is the fixed point of

    lam <- lam + beta * (E_active[V_lam | x] - E_passive[V_lam | x] - lam)

where V_lam solves the threshold system with threshold x and the cap action
the optimality equation prefers at that tax. With both fixed, V_lam is affine
in lam, so the fixed point can also be read off directly from the intercept
and slope of that affine map.

At the full buffer K the active action only allows cut-through, so the
indifference tax there can fall below the index of K-1. The index of K is
therefore never smaller than the index of K-1: a full relay is never
preferred over the same relay one packet shorter.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, ConvergenceError, DegenerateIndexError, DomainError
from .model import RelayParams, active_row, passive_row
from .solver import kernel_for, solve_bands, solve_optimal_cap, threshold_bands

logger = logging.getLogger(__name__)

TABLE_FORMAT_VERSION = 1
MONOTONE_TOLERANCE = 1e-6
UNIT_SLOPE_TOLERANCE = 1e-12


class IndexMode(str, Enum):
    ITERATIVE = "iterative"
    AFFINE = "affine"
    BOTH = "both"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            key = value.strip().lower().replace("_", "")
            key = MODE_ALIASES.get(key, key)
            for mode in cls:
                if mode.value == key:
                    return mode
        return None


MODE_ALIASES = {"affinesolve": "affine"}


@dataclass(frozen=True)
class WhittleConfig:
    """How indices are computed and which states get an exact value"""

    beta: float = 0.1
    max_iter: int = 10_000
    tol_lambda: float = 1e-8
    mode: IndexMode = IndexMode.AFFINE
    grid_stride: Optional[int] = None  # None: max(1, K // 64)
    dense_prefix: int = 16

    def __post_init__(self):
        object.__setattr__(self, "mode", IndexMode(self.mode))
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol_lambda <= 0:
            raise DomainError(f"tol_lambda must be positive, got {self.tol_lambda}")
        if self.grid_stride is not None and self.grid_stride < 1:
            raise DomainError(f"grid_stride must be >= 1, got {self.grid_stride}")
        if self.dense_prefix < 0:
            raise DomainError(f"dense_prefix must be >= 0, got {self.dense_prefix}")

    def stride_for(self, K: int) -> int:
        return self.grid_stride if self.grid_stride is not None else max(1, K // 64)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "beta": self.beta,
            "max_iter": self.max_iter,
            "tol_lambda": self.tol_lambda,
            "mode": self.mode.value,
            "grid_stride": self.grid_stride,
            "dense_prefix": self.dense_prefix,
        }


@dataclass(frozen=True, eq=False)
class IndexTable:
    """Indices at grid states; piecewise-linear in between"""

    relay_id: int
    params: RelayParams
    grid: np.ndarray
    values: np.ndarray

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= -MONOTONE_TOLERANCE))

    def dense(self) -> np.ndarray:
        """The index of every state 0..K"""
        return np.interp(np.arange(self.params.K + 1), self.grid, self.values)

    def with_relay_id(self, relay_id: int) -> "IndexTable":
        return IndexTable(relay_id, self.params, self.grid, self.values)


def _check_state(p: RelayParams, x: int) -> None:
    if not 0 <= x <= p.K:
        raise DomainError(f"State {x} outside [0, {p.K}]")


def gain(p: RelayParams, x: int, lam: float) -> float:
    """E_active[V_lam | x] - E_passive[V_lam | x] with threshold x"""
    V = solve_optimal_cap(p, lam, x).V
    return active_row(x, p).expectation(V) - passive_row(x, p).expectation(V)


def affine_gain(p: RelayParams, x: int, cap_active: bool = False) -> Tuple[float, float]:
    """
    Intercept and slope of lam -> gain(p, x, lam) for one cap action

    One sparse solve with two right-hand sides: the holding cost, which gives
    V at lam = 0, and the passive-state indicator, which gives dV/dlam.
    """
    _check_state(p, x)
    kernel = kernel_for(p)
    cap = True if x == p.K else cap_active
    bands = threshold_bands(kernel, x, cap)
    passive = (np.arange(p.K + 1) > x).astype(float)
    passive[-1] = 0.0 if cap else 1.0
    V, _ = solve_bands(bands, np.column_stack([kernel.cost, passive]))
    act, pas = active_row(x, p), passive_row(x, p)
    intercept = act.expectation(V[:, 0]) - pas.expectation(V[:, 0])
    slope = act.expectation(V[:, 1]) - pas.expectation(V[:, 1])
    return intercept, slope


def fixed_point_residual(p: RelayParams, x: int, lam: float) -> float:
    return abs(gain(p, x, lam) - lam)


def _iterate(p: RelayParams, x: int, cfg: WhittleConfig) -> Tuple[float, int]:
    lam = 0.0
    g = gain(p, x, lam)
    for iteration in range(1, cfg.max_iter + 1):
        new = lam + cfg.beta * (g - lam)
        g_new = gain(p, x, new)
        if abs(new - lam) < cfg.tol_lambda:
            residual = abs(g_new - new)
            if residual > 10 * cfg.tol_lambda:
                logger.warning(
                    "Index at state %d stopped with fixed-point residual %.3e (> 10*tol)", x, residual
                )
            return new, iteration
        lam, g = new, g_new

    raise ConvergenceError(
        f"Index iteration at state {x} did not converge in {cfg.max_iter} iterations",
        last_value=lam,
        residual=abs(g - lam),
        iterations=cfg.max_iter,
    )


def index_iterative(p: RelayParams, x: int, cfg: WhittleConfig) -> Tuple[float, int]:
    """Runs the damped fixed-point update from lam = 0 until the step is below tol_lambda"""
    _check_state(p, x)
    lam, iterations = _iterate(p, x, cfg)
    if x == p.K:
        below, more = _iterate(p, x - 1, cfg)
        lam, iterations = max(lam, below), iterations + more
    return lam, iterations


def _affine_fixed_point(p: RelayParams, x: int, cap_active: bool) -> float:
    intercept, slope = affine_gain(p, x, cap_active)
    if abs(1.0 - slope) < UNIT_SLOPE_TOLERANCE:
        raise DegenerateIndexError(f"Gain map at state {x} has unit slope", slope=slope)
    return intercept / (1.0 - slope)


def _own_index_affine(p: RelayParams, x: int) -> float:
    lam = _affine_fixed_point(p, x, cap_active=False)
    if x < p.K and solve_optimal_cap(p, lam, x).cap_active:
        lam = _affine_fixed_point(p, x, cap_active=True)
    return lam


def index_affine(p: RelayParams, x: int) -> float:
    """Exact fixed point of the affine gain map"""
    _check_state(p, x)
    lam = _own_index_affine(p, x)
    if x == p.K:
        lam = max(lam, _own_index_affine(p, x - 1))
    return lam


def compute_index(p: RelayParams, x: int, cfg: WhittleConfig) -> float:
    """One state's index, in the mode the config asks for"""
    if cfg.mode == IndexMode.ITERATIVE:
        return index_iterative(p, x, cfg)[0]

    try:
        lam = index_affine(p, x)
    except DegenerateIndexError as e:
        logger.warning("%s; falling back to the iterative update", e)
        return index_iterative(p, x, cfg)[0]

    if cfg.mode == IndexMode.BOTH:
        check, _ = index_iterative(p, x, cfg)
        gap = abs(check - lam)
        if gap > 10 * cfg.tol_lambda:
            logger.warning("Index modes disagree at state %d by %.3e", x, gap)
    return lam


def grid_states(K: int, cfg: WhittleConfig) -> List[int]:
    """{0..dense_prefix} then every stride-th state, always ending at K"""
    prefix = min(cfg.dense_prefix, K)
    stride = cfg.stride_for(K)
    states = list(range(prefix + 1))
    states.extend(range(prefix + stride, K + 1, stride))
    if states[-1] != K:
        states.append(K)
    return states


def build_table(p: RelayParams, cfg: WhittleConfig, relay_id: int = 0, threads: int = 1) -> IndexTable:
    grid = grid_states(p.K, cfg)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda x: compute_index(p, x, cfg), grid))
    else:
        values = [compute_index(p, x, cfg) for x in grid]

    table = IndexTable(relay_id, p, np.asarray(grid, dtype=int), np.asarray(values, dtype=float))
    if not table.monotone:
        drops = np.flatnonzero(np.diff(table.values) < -MONOTONE_TOLERANCE)
        logger.warning(
            "Index table for relay %d is not monotone at grid states %s", relay_id, table.grid[drops].tolist()
        )
    logger.debug("Built index table for relay %d over %d grid states", relay_id, len(grid))
    return table


def lookup(table: IndexTable, x: int) -> float:
    _check_state(table.params, x)
    return float(np.interp(x, table.grid, table.values))


def table_to_dict(table: IndexTable) -> Dict[str, Any]:
    return {
        "version": TABLE_FORMAT_VERSION,
        "relay": table.params.as_dict(),
        "grid": [int(x) for x in table.grid],
        "lambda": [float(v) for v in table.values],
    }


def table_from_dict(data: Dict[str, Any], relay_id: int = 0) -> IndexTable:
    if data.get("version") != TABLE_FORMAT_VERSION:
        raise ConfigError(f"Unsupported index table version {data.get('version')!r}", field="version")
    try:
        relay = data["relay"]
        params = RelayParams(float(relay["f"]), float(relay["l"]), float(relay["C"]), int(relay["K"]))
        grid = np.asarray(data["grid"], dtype=int)
        values = np.asarray(data["lambda"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed index table: {e}") from e

    if grid.ndim != 1 or values.shape != grid.shape:
        raise ConfigError("grid and lambda must be arrays of equal length", field="lambda")
    if len(grid) == 0 or np.any(np.diff(grid) <= 0):
        raise ConfigError("grid must be strictly increasing", field="grid")
    if grid[0] != 0 or grid[-1] != params.K:
        raise ConfigError(f"grid must start at 0 and end at K={params.K}", field="grid")
    return IndexTable(relay_id, params, grid, values)


def save_table(table: IndexTable, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(table_to_dict(table), indent=2) + "\n")


def load_table(path: Union[str, Path], relay_id: int = 0) -> IndexTable:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"Index table {path} is not valid JSON: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(data, dict):
        raise ConfigError(f"Index table {path} must be a JSON object")
    return table_from_dict(data, relay_id)


def build_tables(relays: Sequence[RelayParams], cfg: WhittleConfig, threads: int = 1) -> List[IndexTable]:
    """One table per relay; identical relays share a computation"""
    built: Dict[RelayParams, IndexTable] = {}
    tables = []
    for i, p in enumerate(relays):
        if p not in built:
            built[p] = build_table(p, cfg, relay_id=i, threads=threads)
        tables.append(built[p].with_relay_id(i))
    return tables
