"""
On-disk cache of index tables, keyed by relay parameters and index settings
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

from ..core.errors import ConfigError
from ..core.model import RelayParams
from ..core.whittle import (
    TABLE_FORMAT_VERSION,
    IndexTable,
    WhittleConfig,
    build_table,
    load_table,
    save_table,
)
from .config_loader import ScenarioSpec

logger = logging.getLogger(__name__)

# bump when the index values themselves change (cap-state handling is revision 2)
INDEX_REVISION = 2


def cache_key(p: RelayParams, cfg: WhittleConfig) -> str:
    payload = {
        "version": TABLE_FORMAT_VERSION,
        "revision": INDEX_REVISION,
        "relay": p.as_dict(),
        "whittle": cfg.as_dict(),
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:32]


class IndexTableCache:
    """Builds each distinct relay's table once and keeps it on disk"""

    def __init__(self, cache_dir: Union[str, Path], cfg: WhittleConfig, threads: int = 1):
        self.cache_dir = Path(cache_dir)
        self.cfg = cfg
        self.threads = threads
        self.computed = 0
        self.hits = 0
        self._memory: Dict[RelayParams, IndexTable] = {}

    def path_for(self, p: RelayParams) -> Path:
        return self.cache_dir / f"{cache_key(p, self.cfg)}.json"

    def get(self, p: RelayParams) -> IndexTable:
        if p in self._memory:
            return self._memory[p]

        path = self.path_for(p)
        table = None
        if path.exists():
            try:
                table = load_table(path)
                if table.params != p:
                    raise ConfigError(f"cached table holds {table.params}, expected {p}")
                self.hits += 1
                logger.debug("Index table cache hit: %s", path.name)
            except (ValueError, OSError) as e:
                logger.warning("Index table cache entry %s is unusable (%s); recomputing", path, e)
                table = None

        if table is None:
            table = build_table(p, self.cfg, threads=self.threads)
            self.computed += 1
            save_table(table, path)
            logger.info("Computed index table for %s -> %s", p, path.name)

        self._memory[p] = table
        return table

    def tables_for(self, relays: Sequence[RelayParams]) -> List[IndexTable]:
        return [self.get(p).with_relay_id(i) for i, p in enumerate(relays)]

    def precompute(self, relays: Iterable[RelayParams]) -> None:
        for p in relays:
            self.get(p)


def distinct_relays(spec: ScenarioSpec) -> List[RelayParams]:
    seen: Dict[RelayParams, None] = {}
    for _, config in spec.points():
        for p in config.relays:
            seen.setdefault(p, None)
    return list(seen)


def precompute_tables(spec: ScenarioSpec, cache_dir: Union[str, Path], threads: int = 1) -> IndexTableCache:
    """Makes sure every relay of every sweep point has a cached table"""
    cache = IndexTableCache(cache_dir, spec.whittle, threads=threads)
    cache.precompute(distinct_relays(spec))
    logger.info(
        "Index tables for '%s': %d computed, %d loaded from cache", spec.name, cache.computed, cache.hits
    )
    return cache
