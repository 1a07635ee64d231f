"""Flat ``key = value`` experiment configs.

Blank lines and text after ``#`` are ignored.  Values stay strings until a
typed getter reads them, so one file format serves every subcommand.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


_REQUIRED = object()


@dataclass
class Config:
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    source: str = "<config>"

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def _lookup(self, key: str, default, convert, what: str):
        if key not in self.values:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            return default
        raw, line = self.values[key], self.lines[key]
        try:
            return convert(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected {what}, got {raw!r}", line) from None

    def get_str(self, key: str, default=_REQUIRED, choices=None) -> str:
        val = self._lookup(key, default, str, "text")
        if choices is not None and val not in choices:
            raise ConfigError(f"{key} must be one of {sorted(choices)}, got {val!r}", self.lines.get(key))
        return val

    def get_float(self, key: str, default=_REQUIRED) -> float:
        return self._lookup(key, default, float, "a number")

    def get_int(self, key: str, default=_REQUIRED) -> int:
        return self._lookup(key, default, int, "an integer")

    def get_floats(self, key: str, default=_REQUIRED) -> list[float]:
        return self._lookup(key, default, _float_list, "comma-separated numbers")

    def get_vector(self, key: str, default=_REQUIRED) -> np.ndarray:
        """Comma-separated complex amplitudes in Python syntax, e.g. ``1, -1j``."""
        vec = np.asarray(self._lookup(key, default, _complex_list, "comma-separated complex numbers"),
                         dtype=complex)
        if not np.any(vec):
            raise ConfigError(f"{key}: vector is zero", self.lines.get(key))
        return vec

    def unknown_keys(self, allowed) -> list[str]:
        return sorted(set(self.values) - set(allowed))


def _float_list(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


def _complex_list(raw: str) -> list[complex]:
    return [complex(x.replace(" ", "")) for x in raw.split(",") if x.strip()]


def parse_config(text: str, source: str = "<config>") -> Config:
    cfg = Config(source=source)
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        if not key or not key.replace("_", "").replace("-", "").isalnum():
            raise ConfigError(f"invalid key {key!r}", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        if key in cfg.values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {cfg.lines[key]})", lineno)
        cfg.values[key] = value
        cfg.lines[key] = lineno
    return cfg


def load_config(path) -> Config:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
