"""Run configuration: built-in defaults, TOML overrides, validation and hashing.

Precedence is defaults < TOML file < command-line flags.  Unknown keys and
values of the wrong type are rejected with :class:`ConfigError` before any
work starts.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .energy import GpuBaseline, HardwareProfile
from .errors import ConfigError
from .network import NetworkParams
from .plasticity import LearnParams, StdpParams
from .raster_io import SceneSpec


def _learn_defaults() -> dict:
    p = LearnParams()
    d = {f.name: getattr(p, f.name) for f in fields(p) if f.name not in ("lam", "stdp", "rng_seed")}
    d["lambda"] = p.lam
    d["weight_clip"] = list(p.weight_clip)
    d["checkpoint_every"] = 10
    d["stdp"] = asdict(p.stdp)
    return d


def default_config() -> dict:
    scene = SceneSpec().to_dict()
    scene.pop("rng_seed")
    network = NetworkParams().to_dict()
    network["decision"]["k_values"] = list(network["decision"]["k_values"])
    hw = HardwareProfile()
    return {
        "seed": 0,
        "scene": scene,
        "dataset": {"kind": "single", "count": 1, "span": [1.2, 1.9]},
        "network": network,
        "learn": _learn_defaults(),
        "energy": {"e_spike": hw.e_spike, "e_leak": hw.e_leak, "p_gpu": GpuBaseline().p_gpu, "t_process": None},
        "run": {"engine": "snn", "mode": "one_shot", "order": "raster", "mask_threshold": 0.3},
    }


# keys whose default is None but accept a number
_NULLABLE = {
    "network.w_prop", "network.prop_saturation", "network.decision.decision_window",
    "energy.t_process",
}


def _check_type(key: str, default, value):
    if default is None:
        if key in _NULLABLE and (value is None or (isinstance(value, (int, float)) and not isinstance(value, bool))):
            return float(value) if isinstance(value, float) else value
        raise ConfigError(f"{key}: unexpected value {value!r}")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        return [_check_type(f"{key}[]", default[0], v) for v in value] if default else list(value)
    raise ConfigError(f"{key}: unsupported setting")


def merge(base: dict, override: dict, prefix: str = "") -> dict:
    """Copy of ``base`` updated from ``override``; unknown keys raise."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected a table")
            out[key] = merge(base[key], value, path + ".")
        else:
            out[key] = _check_type(path, base[key], value)
    return out


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def set_path(cfg: dict, dotted: str, value) -> None:
    """Apply a command-line override ``a.b.c = value`` (value already typed)."""
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node[k]
    node[keys[-1]] = value


@dataclass
class RunConfig:
    raw: dict
    seed: int
    scene: SceneSpec
    network: NetworkParams
    learn: LearnParams
    hardware: HardwareProfile
    p_gpu: float
    t_process: float | None
    checkpoint_every: int

    @property
    def dataset(self) -> dict:
        return self.raw["dataset"]

    @property
    def run(self) -> dict:
        return self.raw["run"]

    def digest(self, *extra) -> str:
        blob = json.dumps([self.raw, *extra], sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def build(raw: dict) -> RunConfig:
    """Validate a merged config dict and instantiate every parameter bundle."""
    raw = merge(default_config(), raw)
    try:
        seed = raw["seed"]
        if seed < 0:
            raise ValueError("seed must be non-negative")
        scene = SceneSpec(rng_seed=seed, **raw["scene"])
        network = NetworkParams.from_dict(raw["network"])
        learn_raw = dict(raw["learn"])
        stdp = StdpParams(**learn_raw.pop("stdp"))
        lam = learn_raw.pop("lambda")
        every = learn_raw.pop("checkpoint_every")
        if every < 0:
            raise ValueError("checkpoint_every must be non-negative")
        learn_raw["weight_clip"] = tuple(learn_raw["weight_clip"])
        if len(learn_raw["weight_clip"]) != 2:
            raise ValueError("weight_clip needs two values")
        learn = LearnParams(lam=lam, stdp=stdp, rng_seed=seed, **learn_raw)
        e = raw["energy"]
        hardware = HardwareProfile(e_spike=e["e_spike"], e_leak=e["e_leak"])
        GpuBaseline(p_gpu=e["p_gpu"], t_process=e["t_process"] or 0.0)
        ds = raw["dataset"]
        if ds["kind"] not in ("single", "fringe"):
            raise ValueError(f"dataset.kind must be 'single' or 'fringe', got {ds['kind']!r}")
        if ds["count"] < 1:
            raise ValueError("dataset.count must be positive")
        if len(ds["span"]) != 2 or not 0 < ds["span"][0] < ds["span"][1] < 2:
            raise ValueError("dataset.span must be two increasing values in (0, 2)")
        run = raw["run"]
        if run["engine"] not in ("snn", "itoh"):
            raise ValueError(f"run.engine must be 'snn' or 'itoh', got {run['engine']!r}")
        if run["mode"] not in ("one_shot", "propagating"):
            raise ValueError(f"run.mode must be 'one_shot' or 'propagating', got {run['mode']!r}")
        if run["order"] not in ("raster", "coherence"):
            raise ValueError(f"run.order must be 'raster' or 'coherence', got {run['order']!r}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(raw, seed, scene, network, learn, hardware, e["p_gpu"], e["t_process"], every)


def describe_defaults() -> str:
    """Flattened ``key = default`` listing for ``--help``."""
    lines = []

    def walk(node, prefix):
        for key, value in node.items():
            if isinstance(value, dict):
                walk(value, f"{prefix}{key}.")
            else:
                shown = "unset" if value is None else json.dumps(value)
                lines.append(f"  {prefix}{key} = {shown}")

    walk(default_config(), "")
    return "\n".join(lines)
