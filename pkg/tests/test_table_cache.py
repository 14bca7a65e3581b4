import logging

import numpy as np

from src.core.model import RelayParams
from src.core.whittle import WhittleConfig
from src.tools.config_loader import parse_config
from src.tools.table_cache import IndexTableCache, cache_key, distinct_relays, precompute_tables


def test_second_run_is_all_cache_hits(small_scenario, tmp_path):
    spec = parse_config(small_scenario)
    first = precompute_tables(spec, tmp_path)
    assert (first.computed, first.hits) == (2, 0)

    second = precompute_tables(spec, tmp_path)
    assert (second.computed, second.hits) == (0, 2)
    for p in spec.base.relays:
        np.testing.assert_array_equal(first.get(p).values, second.get(p).values)


def test_identical_relays_share_one_table(small_scenario, tmp_path):
    relay = small_scenario["relays"][0]
    spec = parse_config({**small_scenario, "relays": [relay, relay, relay]})
    assert len(distinct_relays(spec)) == 1
    cache = precompute_tables(spec, tmp_path)
    assert cache.computed == 1
    tables = cache.tables_for(spec.base.relays)
    assert [t.relay_id for t in tables] == [0, 1, 2]


def test_sweep_points_are_collected(small_scenario, tmp_path):
    spec = parse_config({**small_scenario, "sweep": {"variable": "f_common", "values": [0.1, 0.2]}})
    assert len(distinct_relays(spec)) == 4


def test_corrupted_entry_is_recomputed(tmp_path, caplog):
    p = RelayParams(0.2, 0.65, 60.0, 8)
    cfg = WhittleConfig()
    IndexTableCache(tmp_path, cfg).get(p)

    path = IndexTableCache(tmp_path, cfg).path_for(p)
    path.write_text("{ not json")
    cache = IndexTableCache(tmp_path, cfg)
    with caplog.at_level(logging.WARNING):
        table = cache.get(p)
    assert cache.computed == 1 and cache.hits == 0
    assert table.params == p
    assert any("unusable" in r.getMessage() for r in caplog.records)
    assert IndexTableCache(tmp_path, cfg).get(p).params == p


def test_key_depends_on_relay_and_settings():
    p = RelayParams(0.2, 0.65, 60.0, 8)
    assert cache_key(p, WhittleConfig()) == cache_key(RelayParams(0.2, 0.65, 60.0, 8), WhittleConfig())
    assert cache_key(p, WhittleConfig()) != cache_key(p, WhittleConfig(dense_prefix=2))
    assert cache_key(p, WhittleConfig()) != cache_key(RelayParams(0.2, 0.65, 60.0, 9), WhittleConfig())
