"""Run configuration: INI sections with typed defaults and strict keys."""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .errors import ConfigError

# every key has a default; the type of the default is the type of the key
DEFAULTS = {
    "target": {
        "mesh": "",
        "views": "",
        "samples": 100000,
        "voxel_resolution": 128,
    },
    "init": {
        "genus": 1,
        "resolution": 16,
        "scale": 1.0,
        "mesh": "",
    },
    "render": {
        "views": 36,
        "radius": 2.5,
        "resolution": 128,
        "sigma": 1.0,
        "fov": 0.0,
    },
    "remesh": {
        "enabled": True,
        "epsilon": 0.002,
        "l_min": 0.02,
        "l_max": 0.2,
        "target_valence": 6,
        "mu": 0.5,
        "passes": 1,
        "period_min": 130,
        "period_max": 200,
        "mode": "refine",
    },
    "optimizer": {
        "lam": 19.0,
        "alpha": 0.01,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "w1": 1e-4,
        "w2": 100.0,
        "plateau_window": 100,
        "plateau_tol": 1e-5,
    },
    "budget": {
        "iterations": 0,
        "snapshot_every": 100,
        "seed": 0,
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(section, key, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError("[%s] %s: cannot parse %r as %s" % (section, key, raw, type(default).__name__)) from None
    return raw


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {s: dict(v) for s, v in DEFAULTS.items()})
    source: str = ""

    def __getitem__(self, section):
        return self.values[section]

    def set(self, section, key, value):
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError("unknown key %s.%s" % (section, key))
        self.values[section][key] = value

    def dumps(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for s, kv in self.values.items():
            cp[s] = {k: _format(v) for k, v in kv.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse INI text; unknown sections or keys raise :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(source=source)
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError("unknown section [%s]" % section)
        for key, raw in cp[section].items():
            if key not in DEFAULTS[section]:
                raise ConfigError("unknown key %r in section [%s]" % (key, section))
            cfg.values[section][key] = _convert(section, key, raw, DEFAULTS[section][key])
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from None
    return parse_config(text, str(path))
