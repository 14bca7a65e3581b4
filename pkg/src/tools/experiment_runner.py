"""
Runs a scenario: every sweep point x policy over all seeds, then writes results

Output is one CSV row per (sweep point, policy) plus a JSON summary. Both
carry the seed list and the config hash, so any row can be regenerated from
the files alone.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..core.errors import ConfigError
from ..core.model import PolicyName
from ..policies import make_policy
from ..sim.simulator import BatchResult, run_batch
from .config_loader import ScenarioSpec, format_value
from .table_cache import IndexTableCache, precompute_tables

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "scenario",
    "sweep_value",
    "policy",
    "seeds_count",
    "avg_cost_mean",
    "avg_cost_stderr",
    "avg_delay_mean",
    "avg_delay_stderr",
    "throughput_mean",
    "throughput_stderr",
    "delivered_mean",
    "drops_suppressed_mean",
]


def _num(value: float) -> str:
    return format(float(value), ".17g")


def csv_row(spec: ScenarioSpec, sweep_value, policy: PolicyName, batch: BatchResult) -> List[str]:
    m, s = batch.mean, batch.stderr
    return [
        spec.name,
        format_value(sweep_value),
        policy.value,
        str(len(batch.seeds)),
        _num(m["avg_cost"]),
        _num(s["avg_cost"]),
        _num(m["avg_delay"]),
        _num(s["avg_delay"]),
        _num(m["throughput"]),
        _num(s["throughput"]),
        _num(m["delivered"]),
        _num(m["drops_suppressed"]),
    ]


@dataclass
class ScenarioResult:
    csv_path: Path
    summary_path: Path
    rows: List[List[str]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)


def output_prefix(spec: ScenarioSpec, out: Optional[Union[str, Path]], output_dir: Union[str, Path]) -> Path:
    if out:
        return Path(out)
    if spec.output:
        return Path(spec.output)
    return Path(output_dir) / spec.name


def run_scenario(
    spec: ScenarioSpec,
    out: Optional[Union[str, Path]] = None,
    output_dir: Union[str, Path] = "./output",
    cache_dir: Union[str, Path] = "./output/index-cache",
    threads: int = 1,
    cache: Optional[IndexTableCache] = None,
) -> ScenarioResult:
    if not spec.policies:
        raise ConfigError("no policies requested", field="policies")

    prefix = output_prefix(spec, out, output_dir)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    result = ScenarioResult(csv_path=Path(f"{prefix}.csv"), summary_path=Path(f"{prefix}.json"))

    if PolicyName.WHITTLE in spec.policies and cache is None:
        cache = precompute_tables(spec, cache_dir, threads=threads)

    seeds = list(spec.seeds)
    summary: Dict[str, Any] = {
        "scenario": spec.name,
        "config_hash": spec.config_hash,
        "seeds": seeds,
        "config": spec.raw,
        "complete": False,
        "results": [],
    }

    # newline="" hands line endings to the csv writer, which always emits "\n"
    with open(result.csv_path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_hash={spec.config_hash}\n")
        handle.write(f"# seeds={json.dumps(seeds)}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        handle.flush()
        try:
            for sweep_value, config in spec.points():
                tables = cache.tables_for(config.relays) if cache is not None else None
                for policy_name in spec.policies:
                    policy = make_policy(policy_name, tables)
                    batch = run_batch(config.with_policy(policy_name), policy, seeds, threads=threads)
                    row = csv_row(spec, sweep_value, policy_name, batch)
                    writer.writerow(row)
                    handle.flush()
                    result.rows.append(row)
                    summary["results"].append({
                        "sweep_value": sweep_value,
                        "policy": policy_name.value,
                        "M": config.M,
                        "mean": batch.mean,
                        "stderr": batch.stderr,
                    })
                    logger.info(
                        "%s %s %s: cost %.4f +/- %.4f",
                        spec.name, format_value(sweep_value) or "-", policy_name.value,
                        batch.mean["avg_cost"], batch.stderr["avg_cost"],
                    )
            summary["complete"] = True
        finally:
            _write_summary(result.summary_path, summary)
            result.summary = summary

    return result


def _strict(value: Any) -> Any:
    """NaN (a run with no deliveries) becomes null so the file stays strict JSON"""
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _strict(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_strict(v) for v in value]
    return value


def _write_summary(path: Path, summary: Dict[str, Any]) -> None:
    path.write_text(json.dumps(_strict(summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
