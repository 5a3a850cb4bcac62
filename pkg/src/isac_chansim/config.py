"""Run-configuration parsing, validation, and hashing.

Configs are YAML mappings with four blocks (scenario, layout, model, run).
Every omitted knob falls back to a default, unknown keys are rejected by
name, and the fully-defaulted config is hashed so output files can be
traced back to the exact settings that produced them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .coeffs import DEFAULT_TX_POWER_DBM, RcsClass, RcsModel
from .geometry import Vec3, ZERO
from .mapping import DEFAULT_DELAY_FLOOR_S
from .scenario import (
    DEFAULT_SENSING_RATIO,
    BaseStation,
    ClusterSpreads,
    LspProfile,
    NetworkLayout,
    Scenario,
    ScenarioKind,
    UserTerminal,
)
from .sensing import EvolutionModel, NewbornDistribution

__all__ = [
    "ConfigError",
    "ModelConfig",
    "RunControls",
    "RunConfig",
    "parse_config",
    "load_config",
    "load_config_data",
    "config_hash",
    "validation_preset",
    "multi_link_preset",
    "OUTPUT_TOKENS",
]

OUTPUT_TOKENS = ("clusters", "cir", "stats", "cdf", "figures")

_SPREAD_KEYS = ("c_asd_deg", "c_asa_deg", "c_zsa_deg")
_PROFILE_KEYS = tuple(
    f.name for f in dataclasses.fields(LspProfile) if f.name != "spreads"
) + _SPREAD_KEYS


class ConfigError(ValueError):
    """A configuration file failed validation."""


@dataclass(frozen=True)
class ModelConfig:
    """Model-level knobs for the sensing extension."""

    evolution: EvolutionModel
    newborn: NewbornDistribution
    sensing_ratio: float
    d_min: float
    map_retry_limit: int
    map_delay_floor_s: float
    evolution_reference: str
    tx_power_dbm: float
    merge_cap: int | None
    rcs: RcsModel
    lsp_overrides: dict = field(default_factory=dict)

    def apply_overrides(self, profile: LspProfile) -> LspProfile:
        """Return the profile with any configured parameter overrides."""
        if not self.lsp_overrides:
            return profile
        plain = {k: v for k, v in self.lsp_overrides.items()
                 if k not in _SPREAD_KEYS}
        spread = {k: v for k, v in self.lsp_overrides.items()
                  if k in _SPREAD_KEYS}
        if spread:
            plain["spreads"] = dataclasses.replace(profile.spreads, **spread)
        return dataclasses.replace(profile, **plain)


@dataclass(frozen=True)
class RunControls:
    seed: int
    drops: int
    outputs: tuple[str, ...]
    parallel: int


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    layout: NetworkLayout
    model: ModelConfig
    run: RunControls
    normalized: dict

    @property
    def config_hash(self) -> str:
        return config_hash(self.normalized)


def config_hash(normalized: dict) -> str:
    """Digest of the fully-defaulted config, stable across formatting.

    Execution-only controls (worker count, which files to emit) are left
    out so output files stay byte-identical regardless of how the same
    simulation was scheduled or which sibling files were requested.
    """
    data = json.loads(json.dumps(normalized))
    data.get("run", {}).pop("parallel", None)
    data.get("run", {}).pop("outputs", None)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _require_mapping(value, path):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{path}' must be a mapping")
    return value


def _check_keys(block: dict, allowed, path):
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}'")


def _as_float(value, path):
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"'{path}' must be a number")
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"'{path}' must be a number") from None
    if not isinstance(value, (int, float)):
        raise ConfigError(f"'{path}' must be a number")
    return float(value)


def _as_positive(value, path):
    out = _as_float(value, path)
    if out <= 0.0:
        raise ConfigError(f"'{path}' must be positive")
    return out


def _as_int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{path}' must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"'{path}' must be at least {minimum}")
    return value


def _as_vec(value, path, require_nonneg_z=True):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"'{path}' must be [x, y, z]")
    x, y, z = (_as_float(v, f"{path}[{i}]") for i, v in enumerate(value))
    if require_nonneg_z and z < 0.0:
        raise ConfigError(f"'{path}' has negative height {z}")
    return Vec3(x, y, z)


def _parse_scenario(block) -> Scenario:
    block = _require_mapping(block, "scenario")
    _check_keys(block, {"kind", "carrier_frequency_hz", "bandwidth_hz"},
                "scenario")
    if "kind" not in block:
        raise ConfigError("'scenario.kind' is required")
    kind_raw = str(block["kind"]).lower()
    try:
        kind = ScenarioKind(kind_raw)
    except ValueError:
        names = ", ".join(k.value for k in ScenarioKind)
        raise ConfigError(
            f"'scenario.kind' must be one of {names}, got '{kind_raw}'"
        ) from None
    return Scenario(
        kind=kind,
        carrier_frequency_hz=_as_positive(
            block.get("carrier_frequency_hz", 28e9),
            "scenario.carrier_frequency_hz"),
        bandwidth_hz=_as_positive(
            block.get("bandwidth_hz", 1e9), "scenario.bandwidth_hz"),
    )


def _parse_layout(block) -> NetworkLayout:
    block = _require_mapping(block, "layout")
    _check_keys(block, {"base_stations", "terminals", "sensing_receiver"},
                "layout")
    stations_raw = block.get("base_stations")
    if not isinstance(stations_raw, list) or not stations_raw:
        raise ConfigError("'layout.base_stations' must be a nonempty list")
    stations = []
    for i, entry in enumerate(stations_raw):
        entry = _require_mapping(entry, f"layout.base_stations[{i}]")
        _check_keys(entry, {"position"}, f"layout.base_stations[{i}]")
        if "position" not in entry:
            raise ConfigError(f"'layout.base_stations[{i}].position' is required")
        stations.append(BaseStation(
            bs_id=i,
            position=_as_vec(entry["position"],
                             f"layout.base_stations[{i}].position"),
        ))
    terminals_raw = block.get("terminals", [])
    if terminals_raw is None:
        terminals_raw = []
    if not isinstance(terminals_raw, list):
        raise ConfigError("'layout.terminals' must be a list")
    terminals = []
    for i, entry in enumerate(terminals_raw):
        entry = _require_mapping(entry, f"layout.terminals[{i}]")
        _check_keys(entry, {"position", "velocity"}, f"layout.terminals[{i}]")
        if "position" not in entry:
            raise ConfigError(f"'layout.terminals[{i}].position' is required")
        velocity = ZERO
        if "velocity" in entry:
            velocity = _as_vec(entry["velocity"],
                               f"layout.terminals[{i}].velocity",
                               require_nonneg_z=False)
        terminals.append(UserTerminal(
            ut_id=i,
            position=_as_vec(entry["position"],
                             f"layout.terminals[{i}].position"),
            velocity=velocity,
        ))
    receiver_raw = block.get("sensing_receiver", "co_located")
    if isinstance(receiver_raw, str):
        if receiver_raw != "co_located":
            raise ConfigError(
                "'layout.sensing_receiver' must be 'co_located' or [x, y, z]")
        receiver = None
    else:
        receiver = _as_vec(receiver_raw, "layout.sensing_receiver")
    return NetworkLayout(base_stations=stations, terminals=terminals,
                         sensing_receiver=receiver)


def _parse_rcs(block) -> RcsModel:
    block = _require_mapping(block, "model.rcs")
    _check_keys(block, {"mixture", "ranges"}, "model.rcs")
    default = RcsModel()
    mixture = dict(default.mixture)
    if "mixture" in block:
        raw = _require_mapping(block["mixture"], "model.rcs.mixture")
        _check_keys(raw, {c.value for c in RcsClass}, "model.rcs.mixture")
        for cls in RcsClass:
            if cls.value in raw:
                mixture[cls] = _as_float(raw[cls.value],
                                         f"model.rcs.mixture.{cls.value}")
    ranges = dict(default.ranges)
    if "ranges" in block:
        raw = _require_mapping(block["ranges"], "model.rcs.ranges")
        _check_keys(raw, {c.value for c in RcsClass}, "model.rcs.ranges")
        for cls in RcsClass:
            if cls.value in raw:
                pair = raw[cls.value]
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise ConfigError(
                        f"'model.rcs.ranges.{cls.value}' must be [low, high]")
                ranges[cls] = (
                    _as_float(pair[0], f"model.rcs.ranges.{cls.value}[0]"),
                    _as_float(pair[1], f"model.rcs.ranges.{cls.value}[1]"),
                )
    try:
        return RcsModel(mixture=mixture, ranges=ranges)
    except ValueError as exc:
        raise ConfigError(f"model.rcs: {exc}") from None


def _parse_model(block) -> ModelConfig:
    block = _require_mapping(block, "model")
    _check_keys(block, {
        "evolution", "newborn", "sensing_ratio", "d_min", "map_retry_limit",
        "map_delay_floor_s", "evolution_reference", "tx_power_dbm",
        "merge_cap", "rcs", "lsp_overrides",
    }, "model")

    evo_raw = _require_mapping(block.get("evolution"), "model.evolution")
    _check_keys(evo_raw, {"amplitude", "decay", "knee"}, "model.evolution")
    evo_default = EvolutionModel()
    try:
        evolution = EvolutionModel(
            amplitude=_as_float(evo_raw.get("amplitude", evo_default.amplitude),
                                "model.evolution.amplitude"),
            decay=_as_float(evo_raw.get("decay", evo_default.decay),
                            "model.evolution.decay"),
            knee=_as_float(evo_raw.get("knee", evo_default.knee),
                           "model.evolution.knee"),
        )
    except ValueError as exc:
        raise ConfigError(f"model.evolution: {exc}") from None

    nb_raw = _require_mapping(block.get("newborn"), "model.newborn")
    _check_keys(nb_raw, {"mean", "variance", "low", "high"}, "model.newborn")
    nb_default = NewbornDistribution()
    try:
        newborn = NewbornDistribution(
            mean=_as_float(nb_raw.get("mean", nb_default.mean),
                           "model.newborn.mean"),
            variance=_as_float(nb_raw.get("variance", nb_default.variance),
                               "model.newborn.variance"),
            low=_as_float(nb_raw.get("low", nb_default.low),
                          "model.newborn.low"),
            high=_as_float(nb_raw.get("high", nb_default.high),
                           "model.newborn.high"),
        )
    except ValueError as exc:
        raise ConfigError(f"model.newborn: {exc}") from None

    reference = str(block.get("evolution_reference", "fbs"))
    if reference not in ("fbs", "lbs"):
        raise ConfigError(
            "'model.evolution_reference' must be 'fbs' or 'lbs'")

    merge_cap = block.get("merge_cap")
    if merge_cap is not None:
        merge_cap = _as_int(merge_cap, "model.merge_cap", minimum=1)

    overrides_raw = _require_mapping(block.get("lsp_overrides"),
                                     "model.lsp_overrides")
    overrides = {}
    for key, value in overrides_raw.items():
        if key not in _PROFILE_KEYS:
            raise ConfigError(f"unknown key 'model.lsp_overrides.{key}'")
        overrides[key] = _as_float(value, f"model.lsp_overrides.{key}")

    return ModelConfig(
        evolution=evolution,
        newborn=newborn,
        sensing_ratio=_as_positive(
            block.get("sensing_ratio", DEFAULT_SENSING_RATIO),
            "model.sensing_ratio"),
        d_min=_as_positive(block.get("d_min", 1.0), "model.d_min"),
        map_retry_limit=_as_int(block.get("map_retry_limit", 8),
                                "model.map_retry_limit", minimum=1),
        map_delay_floor_s=_as_positive(
            block.get("map_delay_floor_s", DEFAULT_DELAY_FLOOR_S),
            "model.map_delay_floor_s"),
        evolution_reference=reference,
        tx_power_dbm=_as_float(
            block.get("tx_power_dbm", DEFAULT_TX_POWER_DBM),
            "model.tx_power_dbm"),
        merge_cap=merge_cap,
        rcs=_parse_rcs(block.get("rcs")),
        lsp_overrides=overrides,
    )


def _parse_run(block) -> RunControls:
    block = _require_mapping(block, "run")
    _check_keys(block, {"seed", "drops", "outputs", "parallel"}, "run")
    outputs_raw = block.get("outputs", ["clusters", "cir", "stats", "cdf"])
    if not isinstance(outputs_raw, list):
        raise ConfigError("'run.outputs' must be a list")
    outputs = []
    for token in outputs_raw:
        token = str(token)
        if token not in OUTPUT_TOKENS:
            raise ConfigError(
                f"unknown output '{token}' in 'run.outputs' "
                f"(choose from {', '.join(OUTPUT_TOKENS)})")
        if token not in outputs:
            outputs.append(token)
    return RunControls(
        seed=_as_int(block.get("seed", 0), "run.seed", minimum=0),
        drops=_as_int(block.get("drops", 1), "run.drops", minimum=0),
        outputs=tuple(outputs),
        parallel=_as_int(block.get("parallel", 1), "run.parallel", minimum=1),
    )


def _normalize(scenario, layout, model, run) -> dict:
    def vec(v: Vec3):
        return [v.x, v.y, v.z]

    return {
        "scenario": {
            "kind": scenario.kind.value,
            "carrier_frequency_hz": scenario.carrier_frequency_hz,
            "bandwidth_hz": scenario.bandwidth_hz,
        },
        "layout": {
            "base_stations": [{"position": vec(bs.position)}
                              for bs in layout.base_stations],
            "terminals": [{"position": vec(ut.position),
                           "velocity": vec(ut.velocity)}
                          for ut in layout.terminals],
            "sensing_receiver": ("co_located"
                                 if layout.sensing_receiver is None
                                 else vec(layout.sensing_receiver)),
        },
        "model": {
            "evolution": {"amplitude": model.evolution.amplitude,
                          "decay": model.evolution.decay,
                          "knee": model.evolution.knee},
            "newborn": {"mean": model.newborn.mean,
                        "variance": model.newborn.variance,
                        "low": model.newborn.low,
                        "high": model.newborn.high},
            "sensing_ratio": model.sensing_ratio,
            "d_min": model.d_min,
            "map_retry_limit": model.map_retry_limit,
            "map_delay_floor_s": model.map_delay_floor_s,
            "evolution_reference": model.evolution_reference,
            "tx_power_dbm": model.tx_power_dbm,
            "merge_cap": model.merge_cap,
            "rcs": {
                "mixture": {c.value: model.rcs.mixture[c] for c in RcsClass},
                "ranges": {c.value: list(model.rcs.ranges[c])
                           for c in RcsClass},
            },
            "lsp_overrides": dict(sorted(model.lsp_overrides.items())),
        },
        "run": {
            "seed": run.seed,
            "drops": run.drops,
            "outputs": list(run.outputs),
            "parallel": run.parallel,
        },
    }


def parse_config(data: dict) -> RunConfig:
    """Validate a config mapping and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(data, {"scenario", "layout", "model", "run"}, "config")
    for required in ("scenario", "layout"):
        if required not in data:
            raise ConfigError(f"missing required block '{required}'")
    scenario = _parse_scenario(data["scenario"])
    layout = _parse_layout(data["layout"])
    model = _parse_model(data.get("model"))
    run = _parse_run(data.get("run"))
    for bs in layout.base_stations:
        for ut in layout.terminals:
            if (bs.position - ut.position).norm() <= 2.0 * model.d_min:
                raise ConfigError(
                    f"layout: base station {bs.bs_id} and terminal {ut.ut_id} "
                    f"must be farther apart than twice model.d_min "
                    f"({2.0 * model.d_min} m)")
    return RunConfig(
        scenario=scenario, layout=layout, model=model, run=run,
        normalized=_normalize(scenario, layout, model, run),
    )


def load_config_data(path) -> dict:
    """Read a YAML config file into a raw mapping (no validation)."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    if data is None:
        raise ConfigError(f"{path} is empty")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data


def load_config(path) -> RunConfig:
    """Read and validate a YAML config file."""
    return parse_config(load_config_data(path))


def validation_preset() -> dict:
    """Single-link urban-micro layout used by the validation battery."""
    return {
        "scenario": {"kind": "umi", "carrier_frequency_hz": 28e9,
                     "bandwidth_hz": 1e9},
        "layout": {
            "base_stations": [{"position": [0.0, 0.0, 5.0]}],
            "terminals": [{"position": [8.0, 8.0, 1.5]}],
        },
        "run": {"seed": 1, "drops": 1},
    }


def multi_link_preset(kind: str = "umi") -> dict:
    """Two-station, three-terminal layout for multi-link runs."""
    return {
        "scenario": {"kind": kind, "carrier_frequency_hz": 28e9,
                     "bandwidth_hz": 1e9},
        "layout": {
            "base_stations": [
                {"position": [100.0, 100.0, 20.0]},
                {"position": [150.0, 150.0, 35.0]},
            ],
            "terminals": [
                {"position": [50.0, 50.0, 1.5]},
                {"position": [20.0, 180.0, 3.5]},
                {"position": [170.0, 30.0, 1.0]},
            ],
        },
        "run": {"seed": 1, "drops": 1},
    }
