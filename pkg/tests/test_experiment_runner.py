import csv
import json
import math

import pytest

from src.core.errors import ConfigError
from src.tools.config_loader import load_config, parse_config
from src.tools.experiment_runner import CSV_COLUMNS, output_prefix, run_scenario


def read_rows(path):
    lines = path.read_text().split("\n")
    assert lines[0].startswith("# config_hash=")
    assert lines[1].startswith("# seeds=")
    return list(csv.reader(lines[2:-1]))


def test_one_row_per_policy(small_scenario, tmp_path):
    spec = parse_config(small_scenario)
    result = run_scenario(spec, out=tmp_path / "small", cache_dir=tmp_path / "cache")

    rows = read_rows(result.csv_path)
    assert rows[0] == CSV_COLUMNS
    assert [row[2] for row in rows[1:]] == ["random", "load", "mmrs", "mlrs", "whittle"]
    assert all(row[3] == "3" for row in rows[1:])
    assert all(row[1] == "" for row in rows[1:])

    summary = json.loads(result.summary_path.read_text())
    assert summary["complete"] is True
    assert summary["seeds"] == [1, 2, 3]
    assert summary["config_hash"] == spec.config_hash
    assert len(summary["results"]) == 5
    assert summary["config"]["name"] == "small"


def test_sweep_rows_follow_point_then_policy_order(small_scenario, tmp_path):
    data = {
        **small_scenario,
        "policies": ["random", "whittle"],
        "sweep": {"variable": "M", "values": [1, 2]},
        "T": 100,
    }
    result = run_scenario(parse_config(data), out=tmp_path / "m", cache_dir=tmp_path / "cache")
    rows = read_rows(result.csv_path)[1:]
    assert [(row[1], row[2]) for row in rows] == [
        ("1", "random"), ("1", "whittle"), ("2", "random"), ("2", "whittle"),
    ]


def test_output_is_byte_identical_across_thread_counts(small_scenario, tmp_path):
    spec = parse_config(small_scenario)
    one = run_scenario(spec, out=tmp_path / "one", cache_dir=tmp_path / "cache", threads=1)
    many = run_scenario(spec, out=tmp_path / "many", cache_dir=tmp_path / "cache", threads=8)
    again = run_scenario(spec, out=tmp_path / "again", cache_dir=tmp_path / "cache", threads=1)
    assert one.csv_path.read_bytes() == many.csv_path.read_bytes()
    assert one.csv_path.read_bytes() == again.csv_path.read_bytes()
    assert b"\r\n" not in one.csv_path.read_bytes()


def test_empty_policy_list_is_rejected(small_scenario, tmp_path):
    spec = parse_config(small_scenario)
    empty = type(spec)(spec.name, spec.base, (), spec.seeds)
    with pytest.raises(ConfigError, match="no policies requested"):
        run_scenario(empty, out=tmp_path / "empty")


def test_output_prefix_precedence(small_scenario, tmp_path):
    spec = parse_config({**small_scenario, "output": "from-config/run"})
    assert str(output_prefix(spec, "cli/run", tmp_path)) == "cli/run"
    assert str(output_prefix(spec, None, tmp_path)) == "from-config/run"
    plain = parse_config(small_scenario)
    assert output_prefix(plain, None, tmp_path) == tmp_path / "small"


def test_dotted_prefix_keeps_its_name(small_scenario, tmp_path):
    spec = parse_config({**small_scenario, "policies": ["random"], "T": 50})
    result = run_scenario(spec, out=tmp_path / "run.v2")
    assert result.csv_path.name == "run.v2.csv"
    assert result.summary_path.name == "run.v2.json"


def by_point(summary):
    points = {}
    for entry in summary["results"]:
        points.setdefault(entry["sweep_value"], {})[entry["policy"]] = entry
    return points


def pooled(a, b, metric):
    return math.hypot(a["stderr"][metric], b["stderr"][metric])


def assert_index_policy_dominates(summary, orderings=False):
    for point, entries in by_point(summary).items():
        whittle = entries.pop("whittle")
        assert len(entries) == 4, point
        for name, baseline in entries.items():
            cost = whittle["mean"]["avg_cost"]
            assert cost <= baseline["mean"]["avg_cost"] - pooled(whittle, baseline, "avg_cost"), (point, name)
            if orderings:
                slack_t = pooled(whittle, baseline, "throughput")
                slack_d = pooled(whittle, baseline, "avg_delay")
                assert whittle["mean"]["throughput"] >= baseline["mean"]["throughput"] - slack_t, (point, name)
                assert whittle["mean"]["avg_delay"] <= baseline["mean"]["avg_delay"] + slack_d, (point, name)


@pytest.mark.slow
def test_index_policy_has_lowest_cost_on_five_relays(scenario_dir, tmp_path):
    spec = load_config(scenario_dir / "cost_five_relays.json")
    result = run_scenario(spec, out=tmp_path / "five", cache_dir=tmp_path / "cache", threads=4)
    assert len(result.summary["results"]) == 5
    assert_index_policy_dominates(result.summary)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["delay_vs_first_hop", "throughput_vs_first_hop"])
def test_index_policy_dominates_first_hop_sweeps(scenario_dir, tmp_path, name):
    data = json.loads((scenario_dir / f"{name}.json").read_text())
    # the heavier half of the sweep, where the policies separate
    values = data["sweep"]["values"]
    data["sweep"]["values"] = values[len(values) // 2:]
    result = run_scenario(parse_config(data), out=tmp_path / name, cache_dir=tmp_path / "cache", threads=4)
    assert result.summary["complete"] is True
    assert_index_policy_dominates(result.summary, orderings=True)
