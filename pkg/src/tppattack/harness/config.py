"""Flat ``key = value`` config files with ``[section]`` headers, plus
command-line ``--section.key value`` overrides."""
from __future__ import annotations

__all__ = ["parse_config_text", "load_config", "apply_overrides",
           "ConfigError", "coerce"]

SECTIONS = ("data", "model", "attack", "defense")


class ConfigError(ValueError):
    pass


def parse_config_text(text, source="<config>"):
    """Parse into {section: {key: string}}; unknown sections are errors."""
    out = {s: {} for s in SECTIONS}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"{source}:{lineno}: key before any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        out[section][key] = value
    return out


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read(), source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def apply_overrides(config, overrides):
    """Apply ['section.key=value', ...] style overrides in place."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not section.key=value")
        dotted, value = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, key = dotted.split(".", 1)
        if section not in config:
            raise ConfigError(f"override names unknown section {section!r}")
        config[section][key.strip()] = value.strip()
    return config


def coerce(config, section, key, kind, default):
    """Typed lookup with a default; raises ConfigError on a bad value."""
    raw = config.get(section, {}).get(key)
    if raw is None:
        return default
    try:
        if kind is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: expected {kind.__name__}") from exc
