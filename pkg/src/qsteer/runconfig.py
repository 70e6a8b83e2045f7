"""Run-configuration schemas: JSON config files plus CLI overrides, with
strict validation and unknown-key rejection. Every run carries an explicit
seed; nothing is seeded from the clock."""

import hashlib
import json
from dataclasses import dataclass


class ConfigError(ValueError):
    """Invalid configuration or usage; maps to exit code 1."""


@dataclass(frozen=True)
class Opt:
    kind: str  # int | float | str | bool | list_str | list_int | list_float
    default: object = None
    required: bool = False
    choices: tuple = None


def _coerce(name, opt: Opt, value):
    if opt.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected int, got {value!r}")
        return value
    if opt.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected number, got {value!r}")
        return float(value)
    if opt.kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected string, got {value!r}")
        return value
    if opt.kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected bool, got {value!r}")
        return value
    if opt.kind.startswith("list_"):
        elem = opt.kind[5:]
        if isinstance(value, str):
            value = [v for v in value.split(",") if v]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name}: expected list, got {value!r}")
        out = []
        for v in value:
            if elem == "int":
                out.append(int(v) if not isinstance(v, bool) else _fail(name, v))
            elif elem == "float":
                out.append(float(v))
            else:
                out.append(str(v))
        return out
    raise AssertionError(f"unknown option kind {opt.kind}")


def _fail(name, value):
    raise ConfigError(f"{name}: bad value {value!r}")


def validate(schema: dict, data: dict, command: str) -> dict:
    unknown = sorted(set(data) - set(schema))
    if unknown:
        raise ConfigError(f"{command}: unknown config keys {unknown}")
    out = {}
    for name, opt in schema.items():
        if name in data and data[name] is not None:
            value = _coerce(name, opt, data[name])
            if opt.choices and value not in opt.choices:
                raise ConfigError(f"{name}: must be one of {opt.choices}, got {value!r}")
            out[name] = value
        elif opt.required:
            raise ConfigError(f"{command}: missing required key {name!r}")
        else:
            out[name] = opt.default
    return out


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def config_hash(config: dict) -> str:
    """Hash of the experiment-defining keys; the output location and other
    path-like keys do not change what a run computes."""
    core = {k: v for k, v in config.items() if k != "out"}
    payload = json.dumps(core, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode()).hexdigest()


_EVAL_PROTOCOL = {
    "experiments": Opt("int", 30),
    "trials": Opt("int", 25),
    "success_threshold": Opt("float", 0.95),
    "workers": Opt("int", 1),
}

SCHEMAS = {
    "train": {
        "systems": Opt("list_str", required=True),
        "mode": Opt("str", "closed", choices=("closed", "open")),
        "gamma": Opt("float", 0.0),
        "f_min": Opt("float"),
        "total_steps": Opt("int", required=True),
        "warmup_steps": Opt("int", 1000),
        "checkpoint_every": Opt("int", 0),
        "buffer_capacity": Opt("int", 500_000),
        "seed": Opt("int", required=True),
        "out": Opt("str", required=True),
    },
    "eval": {
        "checkpoint": Opt("str", required=True),
        "systems": Opt("list_str"),
        "mode": Opt("str", "open", choices=("closed", "open")),
        "gamma": Opt("float", 0.01),
        "f_min": Opt("float"),
        "save_pulses": Opt("bool", False),
        "fixed_T": Opt("float"),
        "fixed_N": Opt("int"),
        "seed": Opt("int", required=True),
        "out": Opt("str", required=True),
        **_EVAL_PROTOCOL,
    },
    "expand": {
        "stages": Opt("list_int", [5, 10, 20, 30, 40, 51]),
        "steps_per_stage": Opt("int", required=True),
        "warmup_steps": Opt("int", 1000),
        "mode": Opt("str", "open", choices=("closed", "open")),
        "gamma": Opt("float", 0.01),
        "seed": Opt("int", required=True),
        "out": Opt("str", required=True),
        **_EVAL_PROTOCOL,
    },
    "grape": {
        "systems": Opt("list_str", required=True),
        "T": Opt("float"),
        "N": Opt("int"),
        "from_pulses": Opt("str"),
        "mode": Opt("str", "open", choices=("closed", "open")),
        "gamma": Opt("float", 0.01),
        "experiments": Opt("int", 1),
        "restarts": Opt("int", 5),
        "max_iters": Opt("int", 300),
        "seed": Opt("int", required=True),
        "out": Opt("str", required=True),
    },
    "rim": {
        "pulses": Opt("str", required=True),
        "source": Opt("str"),  # label recorded in the report (e.g. sac, grape)
        "systems": Opt("list_str"),
        "kinds": Opt("list_str", ["pulse", "decoherence", "combined"]),
        "delta_u": Opt("float", 0.05),
        "delta_gamma": Opt("float", 0.005),
        "nominal_gamma": Opt("float", 0.01),
        "samples": Opt("int", 15),
        "threshold": Opt("float", 0.95),
        "workers": Opt("int", 1),
        "seed": Opt("int", required=True),
        "out": Opt("str", required=True),
    },
    "gap": {
        "closed_checkpoint": Opt("str", required=True),
        "open_checkpoint": Opt("str", required=True),
        "systems": Opt("list_str", ["table1"]),
        "gammas": Opt("list_float", [0.01, 0.02]),
        "seed": Opt("int", required=True),
        "out": Opt("str", required=True),
        **_EVAL_PROTOCOL,
    },
    "export": {
        "kind": Opt("str", required=True, choices=("eval", "rim")),
        "input": Opt("str", required=True),
        "out": Opt("str", required=True),
        "bins": Opt("int", 20),
    },
}
