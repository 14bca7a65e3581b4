import json

import pytest

from src.cli import build_parser, main


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    for name in ("RELAYSEL_CACHE_DIR", "RELAYSEL_THREADS", "RELAYSEL_LOG_LEVEL", "RELAYSEL_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


def test_validate_command(small_scenario, write_scenario, capsys):
    path = write_scenario(small_scenario)
    main(["validate", "--config", str(path)])
    out = capsys.readouterr().out
    assert "SCENARIO VALIDATION" in out
    assert "Scenario 'small' is valid" in out


def test_simulate_writes_results(small_scenario, write_scenario, tmp_path, capsys):
    path = write_scenario({**small_scenario, "T": 100})
    main([
        "simulate", "--config", str(path), "--out", str(tmp_path / "res"),
        "--cache-dir", str(tmp_path / "cache"), "--threads", "2",
    ])
    assert (tmp_path / "res.csv").exists()
    summary = json.loads((tmp_path / "res.json").read_text())
    assert summary["complete"] is True
    assert "SIMULATION COMPLETE" in capsys.readouterr().out


def test_on_fail_override(small_scenario, write_scenario, tmp_path):
    path = write_scenario({**small_scenario, "T": 100, "policies": ["random"]})
    main(["simulate", "--config", str(path), "--out", str(tmp_path / "drop"), "--on-fail", "drop"])
    summary = json.loads((tmp_path / "drop.json").read_text())
    assert summary["results"][0]["policy"] == "random"


def test_index_command_exports_tables(small_scenario, write_scenario, tmp_path, capsys):
    path = write_scenario(small_scenario)
    export = tmp_path / "tables"
    main(["index", "--config", str(path), "--cache-dir", str(tmp_path / "cache"), "--export", str(export)])
    assert sorted(p.name for p in export.iterdir()) == ["small-relay0.json", "small-relay1.json"]
    assert "Computed: 2" in capsys.readouterr().out

    main(["index", "--config", str(path), "--cache-dir", str(tmp_path / "cache")])
    assert "Computed: 0, loaded from cache: 2" in capsys.readouterr().out


def test_bad_config_exits_with_error(small_scenario, write_scenario, capsys):
    path = write_scenario({**small_scenario, "policies": []})
    with pytest.raises(SystemExit) as err:
        main(["validate", "--config", str(path)])
    assert err.value.code == 1
    assert "❌ Error: no policies requested" in capsys.readouterr().out


def test_threads_must_be_positive(small_scenario, write_scenario):
    path = write_scenario(small_scenario)
    with pytest.raises(SystemExit) as err:
        main(["simulate", "--config", str(path), "--threads", "0"])
    assert err.value.code == 1


def test_parser_requires_a_known_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["plot", "--config", "x.json"])
