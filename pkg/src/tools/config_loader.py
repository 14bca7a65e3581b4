"""
Scenario files - JSON in, validated ScenarioSpec out
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from ..core.errors import ConfigError, DomainError
from ..core.model import FailureMode, PolicyName, RelayParams, SystemConfig, validate
from ..core.whittle import WhittleConfig

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {
    "name", "description", "T", "buffer", "relays", "policies", "seeds",
    "sweep", "whittle", "measure_from", "on_fail", "output",
}
WHITTLE_KEYS = {"beta", "max_iter", "tol_lambda", "dense_prefix", "grid_stride", "mode"}


class SweepVariable(str, Enum):
    M = "M"
    F_COMMON = "f_common"
    L_COMMON = "l_common"


@dataclass(frozen=True)
class Sweep:
    variable: SweepVariable
    values: Tuple[Union[int, float], ...]


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    base: SystemConfig
    policies: Tuple[PolicyName, ...]
    seeds: Tuple[int, ...]
    output: Optional[str] = None
    sweep: Optional[Sweep] = None
    whittle: WhittleConfig = field(default_factory=WhittleConfig)
    config_hash: str = ""
    raw: Dict[str, Any] = field(default_factory=dict, compare=False)

    def points(self) -> List[Tuple[Optional[Union[int, float]], SystemConfig]]:
        """(sweep value, config) per sweep point, in file order; one point without a sweep"""
        if self.sweep is None:
            return [(None, self.base)]
        return [(value, apply_sweep(self.base, self.sweep.variable, value)) for value in self.sweep.values]

    def with_on_fail(self, on_fail: FailureMode) -> "ScenarioSpec":
        base = SystemConfig(
            self.base.relays, self.base.T, self.base.seed, self.base.policy, self.base.measure_from, on_fail
        )
        return ScenarioSpec(
            self.name, base, self.policies, self.seeds, self.output, self.sweep,
            self.whittle, self.config_hash, self.raw,
        )


def apply_sweep(base: SystemConfig, variable: SweepVariable, value) -> SystemConfig:
    relays = list(base.relays)
    if variable == SweepVariable.M:
        relays = relays[: int(value)]
    elif variable == SweepVariable.F_COMMON:
        relays = [RelayParams(float(value), r.l, r.C, r.K) for r in relays]
    else:
        relays = [RelayParams(r.f, float(value), r.C, r.K) for r in relays]
    return SystemConfig(tuple(relays), base.T, base.seed, base.policy, base.measure_from, base.on_fail)


def config_hash(raw: Dict[str, Any]) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _require(data: Dict[str, Any], key: str, path: str = ""):
    if key not in data:
        raise ConfigError(f"Missing required key '{key}'", field=f"{path}{key}")
    return data[key]


def _parse_sweep(data: Any) -> Sweep:
    if not isinstance(data, dict):
        raise ConfigError("sweep must be an object", field="sweep")
    try:
        variable = SweepVariable(_require(data, "variable", "sweep."))
    except ValueError:
        raise ConfigError(
            f"Unknown sweep variable {data.get('variable')!r} (expected M, f_common or l_common)",
            field="sweep.variable",
        ) from None
    values = _require(data, "values", "sweep.")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values must be a non-empty list", field="sweep.values")
    for i, value in enumerate(values):
        if variable == SweepVariable.M:
            if not _is_int(value) or value < 1:
                raise ConfigError(f"M sweep values must be positive integers, got {value!r}", field=f"sweep.values[{i}]")
        elif not _is_number(value) or not 0.0 < value < 1.0:
            raise ConfigError(f"{variable.value} sweep values must lie in (0, 1), got {value!r}", field=f"sweep.values[{i}]")
    return Sweep(variable, tuple(values))


def _parse_whittle(data: Any) -> WhittleConfig:
    if data is None:
        return WhittleConfig()
    if not isinstance(data, dict):
        raise ConfigError("whittle must be an object", field="whittle")
    unknown = set(data) - WHITTLE_KEYS
    if unknown:
        raise ConfigError(f"Unknown whittle keys: {sorted(unknown)}", field="whittle")
    try:
        return WhittleConfig(**data)
    except (DomainError, ValueError, TypeError) as e:
        raise ConfigError(f"Invalid whittle settings: {e}", field="whittle") from e


def _parse_relays(data: Dict[str, Any], sweep: Optional[Sweep]) -> List[RelayParams]:
    relays = _require(data, "relays")
    if not isinstance(relays, list) or not relays:
        raise ConfigError("relays must be a non-empty list", field="relays")

    buffer = _require(data, "buffer")
    if _is_int(buffer):
        buffers = [buffer] * len(relays)
    elif isinstance(buffer, list) and all(_is_int(b) for b in buffer):
        if len(buffer) != len(relays):
            raise ConfigError(
                f"buffer list has {len(buffer)} entries for {len(relays)} relays", field="buffer"
            )
        buffers = list(buffer)
    else:
        raise ConfigError("buffer must be an integer or a list of integers", field="buffer")

    # f or l may be left out when a common-value sweep supplies it
    defaults = {}
    if sweep is not None and sweep.variable == SweepVariable.F_COMMON:
        defaults["f"] = sweep.values[0]
    if sweep is not None and sweep.variable == SweepVariable.L_COMMON:
        defaults["l"] = sweep.values[0]

    parsed = []
    for i, relay in enumerate(relays):
        path = f"relays[{i}]."
        if not isinstance(relay, dict):
            raise ConfigError("each relay must be an object", field=f"relays[{i}]")
        values = {}
        for key in ("f", "l", "C"):
            value = relay.get(key, defaults.get(key))
            if value is None:
                raise ConfigError(f"Missing required key '{key}'", field=path + key)
            if not _is_number(value):
                raise ConfigError(f"{key} must be a number, got {value!r}", field=path + key)
            values[key] = value
        parsed.append(RelayParams(values["f"], values["l"], values["C"], buffers[i]))
    return parsed


def parse_config(data: Any) -> ScenarioSpec:
    """Builds and validates a ScenarioSpec from an already-decoded JSON object"""
    if not isinstance(data, dict):
        raise ConfigError("Scenario file must hold a JSON object")
    unknown = set(data) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"Unknown keys: {sorted(unknown)}")

    name = _require(data, "name")
    if not isinstance(name, str) or not name:
        raise ConfigError("name must be a non-empty string", field="name")
    T = _require(data, "T")
    if not _is_int(T):
        raise ConfigError(f"T must be an integer, got {T!r}", field="T")

    sweep = _parse_sweep(data["sweep"]) if data.get("sweep") is not None else None
    relays = _parse_relays(data, sweep)
    if sweep is not None and sweep.variable == SweepVariable.M and max(sweep.values) > len(relays):
        raise ConfigError(
            f"M sweep goes up to {max(sweep.values)} but only {len(relays)} relays are listed",
            field="sweep.values",
        )

    policy_names = _require(data, "policies")
    if not isinstance(policy_names, list):
        raise ConfigError("policies must be a list", field="policies")
    if not policy_names:
        raise ConfigError("no policies requested", field="policies")
    policies = []
    for i, policy in enumerate(policy_names):
        try:
            policies.append(PolicyName.parse(str(policy)))
        except DomainError as e:
            raise ConfigError(str(e), field=f"policies[{i}]") from None

    seeds = _require(data, "seeds")
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds must be a non-empty list", field="seeds")
    for i, seed in enumerate(seeds):
        if not _is_int(seed) or not 0 <= seed < 2 ** 64:
            raise ConfigError(f"seeds must be 64-bit unsigned integers, got {seed!r}", field=f"seeds[{i}]")

    measure_from = data.get("measure_from", 0)
    if not _is_int(measure_from):
        raise ConfigError(f"measure_from must be an integer, got {measure_from!r}", field="measure_from")
    try:
        on_fail = FailureMode(data.get("on_fail", FailureMode.RETRY.value))
    except ValueError:
        raise ConfigError(f"on_fail must be 'retry' or 'drop', got {data.get('on_fail')!r}", field="on_fail") from None

    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a string path prefix", field="output")

    base = SystemConfig(tuple(relays), T, seeds[0], policies[0], measure_from, on_fail)
    spec = ScenarioSpec(
        name=name,
        base=base,
        policies=tuple(policies),
        seeds=tuple(seeds),
        output=output,
        sweep=sweep,
        whittle=_parse_whittle(data.get("whittle")),
        config_hash=config_hash(data),
        raw=data,
    )
    check_spec(spec)
    return spec


def check_spec(spec: ScenarioSpec) -> None:
    """Runs model validation on every sweep point; warnings are logged, errors raised"""
    warned = set()
    for value, config in spec.points():
        for diagnostic in validate(config):
            if diagnostic.is_error:
                raise ConfigError(diagnostic.message, field=diagnostic.field)
            key = (diagnostic.field, diagnostic.message)
            if key not in warned:
                warned.add(key)
                where = "" if value is None else f" (sweep value {value})"
                logger.warning("%s%s: %s", spec.name, where, diagnostic.message)


def load_config(path: Union[str, Path]) -> ScenarioSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read scenario file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e.msg}", line=e.lineno, column=e.colno) from e
    spec = parse_config(data)
    logger.info("Loaded scenario '%s' from %s (%d relays)", spec.name, path, spec.base.M)
    return spec


def format_value(value: Optional[Union[int, float]]) -> str:
    if value is None:
        return ""
    if _is_int(value):
        return str(value)
    return format(float(value), ".17g")
