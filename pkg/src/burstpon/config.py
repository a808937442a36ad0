"""TOML run configuration with dotted-path overrides.

A config file is plain TOML. Trial fields sit at the top level (``seed``,
``n_bursts``, ...) and sub-configs in tables or dotted keys::

    seed = 7
    channel.delta_f = 5e8
    channel.snr_db = 13.0
    frame.n_groups = 250
    rx.init_mode = "zf"

    [sweep]
    axis = "channel.snr_db"
    values = [11.0, 12.0, 13.0, 14.0]
    trials = 50

    [rop_map]
    enabled = true
    slope = 1.0
    intercept = 45.0

``--set key=value`` overrides use the same dotted paths; values are parsed as
TOML literals and fall back to bare strings.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .harness import ConfigError, TrialConfig, set_path

# alternative spellings accepted in files and --set
ALIASES = {"channel.delta_f_hz": "channel.delta_f", "channel2.delta_f_hz": "channel2.delta_f"}


@dataclass
class SweepSpec:
    axis: str | None = None
    values: list[float] = field(default_factory=list)
    trials: int = 20


@dataclass
class RunConfig:
    trial: TrialConfig = field(default_factory=TrialConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    jobs: int = 1
    out: str = "out"


def parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for k, v in tree.items():
        path = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, path + "."))
        else:
            flat[path] = v
    return flat


def _coerce(current: Any, value: Any, path: str) -> Any:
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path} expects true/false, got {value!r}")
        return value
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{path} expects an integer, got {value!r}")
        return int(value)
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} expects a number, got {value!r}")
        return float(value)
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path} expects a string, got {value!r}")
        return value
    if current is None:
        if isinstance(value, str) and value.lower() == "none":
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} expects a number or none, got {value!r}")
        return value
    raise ConfigError(f"{path} is not a settable scalar")


def _current(obj: Any, path: str) -> Any:
    for part in path.split("."):
        if obj is None and part:
            obj = TrialConfig().channel  # an unset channel2 inherits the channel fields
        if not is_dataclass(obj) or part not in {f.name for f in fields(obj)}:
            raise ConfigError(f"unknown config key {path!r}")
        obj = getattr(obj, part)
    if is_dataclass(obj):
        raise ConfigError(f"{path!r} names a section, not a value")
    return obj


def apply(run: RunConfig, path: str, value: Any) -> RunConfig:
    """Set one dotted key on a run configuration."""
    path = ALIASES.get(path, path)
    head, _, rest = path.partition(".")
    if head == "sweep":
        if rest == "axis":
            run.sweep.axis = str(value)
        elif rest == "values":
            if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
                raise ConfigError("sweep.values must be a list of numbers")
            run.sweep.values = [float(v) for v in value]
        elif rest == "trials":
            run.sweep.trials = _coerce(1, value, path)
        else:
            raise ConfigError(f"unknown config key {path!r}")
        return run
    if head == "run":
        if rest == "jobs":
            run.jobs = _coerce(1, value, path)
        elif rest == "out":
            run.out = str(value)
        else:
            raise ConfigError(f"unknown config key {path!r}")
        return run
    current = _current(run.trial, path)
    run.trial = set_path(run.trial, path, _coerce(current, value, path))
    return run


def load(path: str | Path | None = None, overrides: list[str] | tuple[str, ...] = ()) -> RunConfig:
    """Read a TOML file (optional) and apply ``key=value`` overrides in order."""
    run = RunConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                tree = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        flat = _flatten(tree)
        for key, value in flat.items():
            run = apply(run, key, value)
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        run = apply(run, key.strip(), parse_value(text.strip()))
    if run.sweep.trials < 1:
        raise ConfigError("sweep.trials must be >= 1")
    if run.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return run


def with_seed(run: RunConfig, seed: int | None) -> RunConfig:
    if seed is not None:
        run.trial = replace(run.trial, seed=int(seed))
    return run
