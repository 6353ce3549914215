"""Experiment configuration files: a small TOML-style grammar.

Sections in brackets, `key = value` lines, `#` comments (full-line or
trailing). Values are integers, floats (scientific notation and `inf`
allowed), booleans `true`/`false`, or quoted strings. Every knob has a
default, so the empty file is a valid config. Diagnostics name the offending
key and line.

Recognized keys::

    [sim]       n, m, plane_side, seed, tau, max_slots_per_hop
    [channel]   bandwidth_hz, noise_psd_dbm_hz, tx_power_w, path_loss_exp,
                slot_duration_s, tx_rate_fraction
    [protocol]  rho, l, b
    [data]      source, mnist_dir, target_count, full_count,
                n_target_labels, pool_seed

`tau` is a positive slot count; omit it (or set `inf`) to collect without a
deadline. Bare keys in `--set key=value` overrides resolve against this same
table; section-qualified `section.key` works too.
"""

import dataclasses
import math

from .channel import ChannelParams
from .protocol import ProtocolConfig
from .simulator import SimConfig


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"{message}{where}")


def _parse_scalar(token: str, line: int):
    token = token.strip()
    if not token:
        raise ConfigError("empty value", line)
    if token.startswith('"') and token.endswith('"') and len(token) >= 2:
        return token[1:-1]
    low = token.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"cannot parse value {token!r}", line) from None


def _strip_comment(line: str) -> str:
    in_quotes = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quotes = not in_quotes
        elif ch == "#" and not in_quotes:
            return line[:i]
    return line


def parse_config_text(text: str) -> dict[tuple[str, str], tuple[object, int]]:
    """Parse to {(section, key): (value, line)}. Unknown names fail later, with the line."""
    entries: dict[tuple[str, str], tuple[object, int]] = {}
    section = "sim"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if not section:
                raise ConfigError("empty section name", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise ConfigError("empty key", lineno)
        if (section, key) in entries:
            raise ConfigError(f"duplicate key {section}.{key}", lineno)
        entries[(section, key)] = (_parse_scalar(value, lineno), lineno)
    return entries


def _positive(x, name, line):
    if not isinstance(x, (int, float)) or isinstance(x, bool) or x <= 0:
        raise ConfigError(f"{name} must be a positive number, got {x!r}", line)
    return float(x)


def _positive_int(x, name, line):
    if not isinstance(x, int) or isinstance(x, bool) or x < 1:
        raise ConfigError(f"{name} must be a positive integer, got {x!r}", line)
    return x


def _nonneg_int(x, name, line):
    if not isinstance(x, int) or isinstance(x, bool) or x < 0:
        raise ConfigError(f"{name} must be a nonnegative integer, got {x!r}", line)
    return x


def _int_any(x, name, line):
    if not isinstance(x, int) or isinstance(x, bool):
        raise ConfigError(f"{name} must be an integer, got {x!r}", line)
    return x


def _unit_interval_halfopen(x, name, line):
    if not isinstance(x, (int, float)) or isinstance(x, bool) or not 0.0 <= float(x) < 1.0:
        raise ConfigError(f"{name} must lie in [0, 1), got {x!r}", line)
    return float(x)


def _fraction(x, name, line):
    if not isinstance(x, (int, float)) or isinstance(x, bool) or not 0.0 < float(x) <= 1.0:
        raise ConfigError(f"{name} must lie in (0, 1], got {x!r}", line)
    return float(x)


def _string(x, name, line):
    if not isinstance(x, str):
        raise ConfigError(f"{name} must be a quoted string, got {x!r}", line)
    return x


# (section, key) -> (validator, human name). The builder consumes this table,
# so unknown keys are diagnosed uniformly.
_KEYS = {
    ("sim", "n"): (_positive_int, "device count n"),
    ("sim", "m"): (_positive_int, "max hops m"),
    ("sim", "plane_side"): (_positive, "plane_side"),
    ("sim", "seed"): (_int_any, "seed"),
    ("sim", "tau"): (None, "tau"),  # special: positive int or inf
    ("sim", "max_slots_per_hop"): (_positive_int, "max_slots_per_hop"),
    ("channel", "bandwidth_hz"): (_positive, "bandwidth_hz"),
    ("channel", "noise_psd_dbm_hz"): (None, "noise_psd_dbm_hz"),  # any finite float
    ("channel", "tx_power_w"): (_positive, "tx_power_w"),
    ("channel", "path_loss_exp"): (_positive, "path_loss_exp"),
    ("channel", "slot_duration_s"): (_positive, "slot_duration_s"),
    ("channel", "tx_rate_fraction"): (_fraction, "tx_rate_fraction"),
    ("protocol", "rho"): (_unit_interval_halfopen, "rho"),
    ("protocol", "l"): (_nonneg_int, "label privacy threshold l"),
    ("protocol", "b"): (_positive_int, "per-label cap b"),
    ("data", "source"): (_string, "data source"),
    ("data", "mnist_dir"): (_string, "mnist_dir"),
    ("data", "target_count"): (_positive_int, "target_count"),
    ("data", "full_count"): (_positive_int, "full_count"),
    ("data", "n_target_labels"): (_positive_int, "n_target_labels"),
    ("data", "pool_seed"): (_int_any, "pool_seed"),
}

# Bare override names resolve through this: every key is unique across
# sections, so `--set rho=0.1` needs no qualifier.
_BARE = {key: (section, key) for (section, key) in _KEYS}


def parse_override(item: str) -> tuple[tuple[str, str], object]:
    """Parse one `--set key=value` (key may be `section.key` or bare)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    name, value = item.split("=", 1)
    name = name.strip().lower()
    if "." in name:
        section, key = name.split(".", 1)
        target = (section.strip(), key.strip())
        if target not in _KEYS:
            raise ConfigError(f"unknown config key {name!r}")
    else:
        if name not in _BARE:
            raise ConfigError(f"unknown config key {name!r}")
        target = _BARE[name]
    return target, _parse_scalar(value, 0)


def build_sim_config(
    entries: dict[tuple[str, str], tuple[object, int]],
    overrides: list[tuple[tuple[str, str], object]] = (),
) -> SimConfig:
    """Validate entries against the key table and assemble a SimConfig."""
    merged: dict[tuple[str, str], tuple[object, int]] = {}
    for target, (value, line) in entries.items():
        if target not in _KEYS:
            raise ConfigError(f"unknown config key {target[0]}.{target[1]}", line)
        merged[target] = (value, line)
    for target, value in overrides:
        merged[target] = (value, 0)

    def get(section, key, default):
        if (section, key) not in merged:
            return default
        value, line = merged[(section, key)]
        validator, name = _KEYS[(section, key)]
        if validator is not None:
            return validator(value, name, line)
        return value

    tau_raw = merged.get(("sim", "tau"))
    tau: int | None = None
    if tau_raw is not None:
        value, line = tau_raw
        if isinstance(value, float) and math.isinf(value):
            tau = None
        elif isinstance(value, int) and not isinstance(value, bool) and value >= 1:
            tau = value
        else:
            raise ConfigError(f"tau must be a positive integer or inf, got {value!r}", line)

    noise_raw = merged.get(("channel", "noise_psd_dbm_hz"))
    if noise_raw is not None:
        value, line = noise_raw
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            raise ConfigError(f"noise_psd_dbm_hz must be a finite number, got {value!r}", line)
        noise_w_hz = 10.0 ** ((float(value) - 30.0) / 10.0)
    else:
        noise_w_hz = ChannelParams.noise_psd_w_hz

    source = get("data", "source", "synthetic")
    if source not in ("synthetic", "idx"):
        line = merged.get(("data", "source"), (None, 0))[1]
        raise ConfigError(f"data source must be 'synthetic' or 'idx', got {source!r}", line)

    channel = ChannelParams(
        bandwidth_hz=get("channel", "bandwidth_hz", ChannelParams.bandwidth_hz),
        noise_psd_w_hz=noise_w_hz,
        path_loss_exp=get("channel", "path_loss_exp", ChannelParams.path_loss_exp),
        tx_power_w=get("channel", "tx_power_w", ChannelParams.tx_power_w),
        slot_duration_s=get("channel", "slot_duration_s", ChannelParams.slot_duration_s),
        tx_rate_fraction=get("channel", "tx_rate_fraction", ChannelParams.tx_rate_fraction),
    )
    protocol = ProtocolConfig(
        per_label_cap=get("protocol", "b", ProtocolConfig.per_label_cap),
        privacy_threshold=get("protocol", "l", ProtocolConfig.privacy_threshold),
        rho=get("protocol", "rho", ProtocolConfig.rho),
    )
    defaults = SimConfig()
    config = SimConfig(
        n_devices=get("sim", "n", defaults.n_devices),
        max_hops=get("sim", "m", defaults.max_hops),
        plane_side_m=get("sim", "plane_side", defaults.plane_side_m),
        channel=channel,
        protocol=protocol,
        tau_slots=tau,
        data_source=source,
        mnist_dir=get("data", "mnist_dir", None),
        target_count=get("data", "target_count", defaults.target_count),
        full_count=get("data", "full_count", defaults.full_count),
        n_target_labels=get("data", "n_target_labels", defaults.n_target_labels),
        seed=get("sim", "seed", defaults.seed),
        pool_seed=get("data", "pool_seed", defaults.pool_seed),
        max_slots_per_hop=get("sim", "max_slots_per_hop", defaults.max_slots_per_hop),
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def load_sim_config(path: str | None, overrides: list[str] = (), seed: int | None = None) -> SimConfig:
    """Read a config file (None = all defaults), apply overrides, then the seed flag."""
    entries: dict[tuple[str, str], tuple[object, int]] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            entries = parse_config_text(fh.read())
    parsed = [parse_override(item) for item in overrides]
    config = build_sim_config(entries, parsed)
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    return config
