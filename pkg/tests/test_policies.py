import numpy as np
import pytest
from scipy.stats import chisquare

from src.core.errors import DomainError, PolicyConfigError
from src.core.model import RelayParams
from src.core.whittle import WhittleConfig, build_tables
from src.policies import make_policy
from src.policies.base_policy import PolicyContext, argmin_uniform, pick_uniform
from src.policies.baseline_policies import (
    MLRSPolicy,
    MMRSPolicy,
    select_load_based,
    select_mlrs,
    select_mmrs,
    select_random,
)
from src.policies.whittle_policy import WhittlePolicy, select_whittle


def make_ctx(queues, f=None, l=None, seed=7, K=50, C=None, tables=None):
    M = len(queues)
    f = f or [0.3] * M
    l = l or [0.6] * M
    C = C or [1.0] * M
    params = [RelayParams(fi, li, ci, K) for fi, li, ci in zip(f, l, C)]
    return PolicyContext(
        slot=0,
        queues=np.asarray(queues, dtype=np.int64),
        params=params,
        rng_stream=np.random.default_rng(seed),
        index_tables=tables,
    )


def draw(select, ctx, n):
    return np.array([select(ctx) for _ in range(n)])


def test_random_single_relay():
    ctx = make_ctx([4])
    assert set(draw(select_random, ctx, 50)) == {0}


def test_random_is_uniform():
    picks = draw(select_random, make_ctx([0] * 5), 100_000)
    freq = np.bincount(picks, minlength=5) / len(picks)
    assert np.all(np.abs(freq - 0.2) <= 0.005)


def test_random_replays_with_seed():
    a = draw(select_random, make_ctx([0] * 4, seed=99), 200)
    b = draw(select_random, make_ctx([0] * 4, seed=99), 200)
    np.testing.assert_array_equal(a, b)


def test_load_based_picks_shortest_queue():
    assert select_load_based(make_ctx([3, 1, 2])) == 1


def test_load_based_ties_are_uniform():
    picks = draw(select_load_based, make_ctx([2, 2, 5]), 100_000)
    counts = np.bincount(picks, minlength=3)
    assert counts[2] == 0
    assert chisquare(counts[:2]).pvalue > 0.001

    all_equal = draw(select_load_based, make_ctx([4, 4, 4, 4]), 100_000)
    assert chisquare(np.bincount(all_equal, minlength=4)).pvalue > 0.001


def test_mmrs_on_published_parameters():
    ctx = make_ctx(
        [0] * 5, f=[0.68, 0.63, 0.55, 0.44, 0.38], l=[0.71, 0.64, 0.6, 0.56, 0.47]
    )
    assert set(draw(select_mmrs, ctx, 100)) == {0}


def test_mmrs_uses_the_weaker_hop():
    assert select_mmrs(make_ctx([0, 0], f=[0.2, 0.9], l=[0.9, 0.3])) == 1
    tied = draw(select_mmrs, make_ctx([0, 0], f=[0.5, 0.5], l=[0.5, 0.5]), 20_000)
    assert chisquare(np.bincount(tied, minlength=2)).pvalue > 0.001


def test_mlrs_weighs_queue_by_second_hop():
    assert select_mlrs(make_ctx([4, 2], l=[0.5, 0.9])) == 0
    empty = draw(select_mlrs, make_ctx([0, 0, 0]), 30_000)
    assert chisquare(np.bincount(empty, minlength=3)).pvalue > 0.001
    tied = draw(select_mlrs, make_ctx([1, 1], l=[0.6, 0.6]), 20_000)
    assert chisquare(np.bincount(tied, minlength=2)).pvalue > 0.001


def test_policy_classes_match_functions():
    ctx = make_ctx([5, 1, 3], f=[0.3, 0.4, 0.35], l=[0.5, 0.9, 0.6])
    mlrs, mmrs = MLRSPolicy(), MMRSPolicy()
    mlrs.prepare(ctx.params)
    assert mlrs.select(ctx) == select_mlrs(ctx)
    assert mmrs.select(ctx) == select_mmrs(ctx)


def test_lone_candidate_consumes_no_randomness():
    rng = np.random.default_rng(3)
    state = rng.bit_generator.state
    assert pick_uniform(np.array([2]), rng) == 2
    assert argmin_uniform(np.array([3.0, 1.0, 2.0]), rng) == 1
    assert rng.bit_generator.state == state


def _identical_tables(M, K=20, C=1.0):
    p = RelayParams(0.3, 0.6, C, K)
    return build_tables([p] * M, WhittleConfig())


def test_whittle_prefers_shorter_queue_on_identical_relays():
    tables = _identical_tables(2)
    ctx = make_ctx([0, 7], K=20, tables=tables)
    assert select_whittle(ctx) == 0

    policy = WhittlePolicy(tables)
    policy.prepare(ctx.params)
    assert policy.select(ctx) == 0


def test_whittle_ties_are_uniform():
    tables = _identical_tables(2)
    picks = draw(select_whittle, make_ctx([3, 3], K=20, tables=tables), 20_000)
    assert chisquare(np.bincount(picks, minlength=2)).pvalue > 0.001


def test_whittle_choice_survives_common_cost_scaling():
    relays = [RelayParams(0.3, 0.6, 1.0, 20), RelayParams(0.2, 0.7, 2.0, 20)]
    scaled = [RelayParams(p.f, p.l, 4.0 * p.C, p.K) for p in relays]
    tables = build_tables(relays, WhittleConfig())
    scaled_tables = build_tables(scaled, WhittleConfig())
    for queues in ([0, 0], [3, 1], [1, 6], [12, 9], [20, 20]):
        a = select_whittle(make_ctx(queues, f=[0.3, 0.2], l=[0.6, 0.7], K=20, tables=tables, seed=5))
        b = select_whittle(make_ctx(queues, f=[0.3, 0.2], l=[0.6, 0.7], K=20, tables=scaled_tables, seed=5))
        assert a == b


def test_whittle_needs_tables():
    ctx = make_ctx([0, 0], K=20)
    with pytest.raises(PolicyConfigError):
        select_whittle(ctx)
    with pytest.raises(PolicyConfigError):
        WhittlePolicy().prepare(ctx.params)
    with pytest.raises(PolicyConfigError):
        WhittlePolicy(_identical_tables(3)).prepare(ctx.params)


def test_whittle_rejects_tables_for_another_buffer():
    ctx = make_ctx([0, 0], K=30)
    with pytest.raises(PolicyConfigError):
        WhittlePolicy(_identical_tables(2, K=20)).prepare(ctx.params)


def test_make_policy_by_name():
    assert make_policy("random").name == "random"
    assert make_policy("LOAD").name == "load"
    assert make_policy("whittle", _identical_tables(1)).name == "whittle"
    with pytest.raises(DomainError):
        make_policy("round-robin")
