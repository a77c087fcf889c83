"""Experiment configuration.

The file format is INI-style: one ``[section]`` per module with flat
``key = value`` lines.  Values are typed by a fixed schema and unknown
sections or keys are rejected.  Environment variables named
``RANDZS_<SECTION>_<KEY>`` (upper case, dashes as underscores) override
file values; explicit ``--set section.key=value`` overrides come last.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass

from .errors import ConfigurationError

__all__ = ["SCHEMA", "EXECUTION_KEYS", "ExperimentConfig", "load_config", "parse_value"]

ENV_PREFIX = "RANDZS_"
# keys that affect where and how fast a run executes, never its results
EXECUTION_KEYS = (("experiment", "threads"), ("experiment", "output"))


def _floats(text):
    items = [t for t in str(text).replace(",", " ").split() if t]
    if not items:
        raise ValueError("empty list")
    return tuple(float(t) for t in items)


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text):
    v = str(text).strip().lower()
    return None if v in ("", "none", "auto") else float(v)


_TYPES = {"float": float, "int": int, "str": str, "floats": _floats, "bool": _bool,
          "ofloat": _optional_float}

# section -> key -> (type, default)
SCHEMA = {
    "experiment": {
        "name": ("str", "randzs"),
        "seed": ("int", 0),
        "output": ("str", "runs"),
        "threads": ("int", 0),
    },
    "signal": {
        "length": ("float", 20.0),
        "step": ("float", 0.1),
        "D": ("floats", (1.0,)),
        "polarization": ("str", "unpolarized"),
        "runs": ("int", 200),
        "member": ("int", 0),
    },
    "spectral": {
        "scheme": ("str", "mal"),
        "bins": ("int", 60),
        "edge_fraction": ("float", 0.15),
        "spacing_bins": ("int", 30),
        "ipr_scheme": ("str", "cd"),
        "ipr_window": ("float", 0.05),
        "eta_bins": ("int", 30),
        "eta_min": ("ofloat", None),
        "eta_max": ("ofloat", None),
    },
    "lyapunov": {
        "step": ("float", 0.05),
        "x_max": ("float", 500.0),
        "batches": ("int", 256),
        "renorm": ("int", 10),
        "xi_min": ("float", 0.0),
        "xi_max": ("float", 0.8),
        "xi_points": ("int", 9),
        "eta_min": ("float", 0.1),
        "eta_max": ("float", 1.7),
        "eta_points": ("int", 17),
    },
    "scattering": {
        "xi": ("float", 0.0),
        "eta": ("float", 0.5),
        "T": ("floats", (50.0, 100.0, 200.0)),
        "runs": ("int", 500),
        "tau": ("float", 0.1),
        "dump_samples": ("bool", False),
    },
    "link": {
        "P_c": ("float", 0.05),
        "t_c": ("float", 3e-11),
        "G": ("float", 100.0),
        "eta_sp": ("float", 2.0),
        "h": ("float", 6.6e-34),
        "nu0": ("float", 2e14),
        "N_a": ("int", 10),
        "alpha": ("float", 0.2),
        "L_a": ("float", 100.0),
        "L_total": ("float", 1000.0),
        "B": ("float", 50e12),
    },
    "noise": {
        "length": ("float", 80.0),
        "step": ("float", 0.075),
        "D": ("floats", (1.0, 2.0, 4.0)),
        "realizations": ("int", 2),
        "sigma2": ("float", 1.0),
        "method": ("str", "exact"),
        "runs": ("int", 0),
        "full_matrix": ("bool", False),
    },
    "capacity": {
        "mode": ("str", "fitted"),
        "D": ("float", 1.0),
        "c0": ("float", 0.0),
    },
}


def parse_value(section, key, text):
    """Convert ``text`` by the schema type of ``section.key``."""
    try:
        typ, _ = SCHEMA[section][key]
    except KeyError:
        raise ConfigurationError(f"unknown configuration key {section}.{key}") from None
    try:
        if isinstance(text, str):
            v = _TYPES[typ](text)
        elif typ == "floats":
            v = tuple(float(x) for x in (text if isinstance(text, (list, tuple)) else [text]))
        elif typ == "ofloat":
            v = None if text is None else float(text)
        else:
            v = _TYPES[typ](text)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{section}.{key}: cannot parse {text!r} as {typ}") from exc
    if isinstance(v, float) and not math.isfinite(v):
        raise ConfigurationError(f"{section}.{key}: value must be finite")
    return v


def _format(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentConfig:
    """Resolved configuration: every schema key has a typed value."""

    values: dict

    @classmethod
    def defaults(cls) -> "ExperimentConfig":
        return cls({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})

    def get(self, section, key):
        return self.values[section][key]

    def section(self, name) -> dict:
        return dict(self.values[name])

    def set(self, section, key, text) -> None:
        self.values[section][key] = parse_value(section, key, text)

    def apply_overrides(self, pairs) -> None:
        """Apply ``section.key=value`` strings."""
        for item in pairs or ():
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise ConfigurationError(f"override must look like section.key=value: {item!r}")
            name, text = item.split("=", 1)
            section, key = name.strip().split(".", 1)
            self.set(section.strip(), key.strip(), text.strip())

    def apply_environment(self, environ=None) -> list:
        """Apply ``RANDZS_<SECTION>_<KEY>`` variables; returns the names used."""
        environ = os.environ if environ is None else environ
        used = []
        for s, keys in SCHEMA.items():
            for k in keys:
                name = f"{ENV_PREFIX}{s}_{k}".upper().replace("-", "_")
                if name in environ:
                    self.set(s, k, environ[name])
                    used.append(name)
        return used

    def to_text(self, exclude=()) -> str:
        """Serialize; ``exclude`` lists ``(section, key)`` pairs to omit."""
        out = io.StringIO()
        for s, keys in self.values.items():
            out.write(f"[{s}]\n")
            for k, v in keys.items():
                if (s, k) not in exclude:
                    out.write(f"{k} = {_format(v)}\n")
            out.write("\n")
        return out.getvalue()

    @classmethod
    def from_text(cls, text, origin="<string>") -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text, source=origin)
        except configparser.Error as exc:
            raise ConfigurationError(f"{origin}: {exc}") from exc
        cfg = cls.defaults()
        for s in cp.sections():
            if s not in SCHEMA:
                raise ConfigurationError(f"{origin}: unknown section [{s}]")
            for k, v in cp.items(s):
                cfg.set(s, k, v)
        return cfg

    def canonical(self) -> dict:
        return {s: {k: list(v) if isinstance(v, tuple) else v for k, v in keys.items()}
                for s, keys in self.values.items()}

    def hash(self, exclude=EXECUTION_KEYS) -> str:
        """SHA-256 of the canonical JSON, ignoring keys that do not affect results."""
        c = self.canonical()
        for s, k in exclude:
            c[s].pop(k, None)
        return hashlib.sha256(json.dumps(c, sort_keys=True).encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.canonical() == other.canonical()


def load_config(path=None, overrides=None, environ=None) -> ExperimentConfig:
    """Defaults, then the file, then environment variables, then overrides."""
    if path is None:
        cfg = ExperimentConfig.defaults()
    else:
        with open(path) as fh:
            cfg = ExperimentConfig.from_text(fh.read(), str(path))
    cfg.apply_environment(environ)
    cfg.apply_overrides(overrides)
    return cfg
