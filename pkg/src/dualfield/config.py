"""Run configuration: flat ``key = value`` files merged with command-line flags."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .cases import CASES, get_case


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    case: str = "conservation"
    K: int = 3
    N: int = 2
    dt: float = 1 / 20
    t_end: float = 10.0
    Re: float = math.inf
    output_dir: str = "out"
    diag_every: int = 1
    spectrum: bool = False
    spectrum_n: int = 64
    checkpoint_every: int = 0
    dump_every: int = 0
    dump_n: int = 16
    solver: str = "auto"
    div_samples: int = 5
    sweep_K: tuple = (2, 3, 4)
    sweep_N: tuple = (1, 2)
    initial: str = ""
    deterministic: bool = True

    @property
    def inviscid(self) -> bool:
        return math.isinf(self.Re)

    def validate(self) -> "RunConfig":
        if self.case not in CASES:
            raise ConfigError(f"case: unknown case {self.case!r}; choose from {sorted(CASES)}")
        if self.K < 1:
            raise ConfigError(f"K: must be >= 1, got {self.K}")
        if self.N < 1:
            raise ConfigError(f"N: must be >= 1, got {self.N}")
        if not self.dt > 0:
            raise ConfigError(f"dt: must be > 0, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigError(f"t_end: must be >= 0, got {self.t_end}")
        if not self.Re > 0:
            raise ConfigError(f"Re: must be > 0 (use inf or --inviscid), got {self.Re}")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"t_end: {self.t_end} is not a whole number of dt={self.dt} steps")
        if self.diag_every < 1:
            raise ConfigError(f"diag_every: must be >= 1, got {self.diag_every}")
        if self.solver not in ("auto", "superlu", "pardiso"):
            raise ConfigError(f"solver: expected auto, superlu or pardiso, got {self.solver!r}")
        if not self.deterministic:
            raise ConfigError("deterministic: runs are always deterministic; the flag cannot be false")
        if self.spectrum and self.spectrum_n < 2 * self.K * self.N:
            raise ConfigError(f"spectrum_n: {self.spectrum_n} under-resolves K={self.K}, N={self.N}; use >= {2 * self.K * self.N}")
        if self.dump_every < 0 or self.checkpoint_every < 0:
            raise ConfigError("dump_every and checkpoint_every must be >= 0")
        if self.initial and self.initial not in CASES:
            raise ConfigError(f"initial: unknown initial field {self.initial!r}")
        return self

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sweep_K"] = list(self.sweep_K)
        d["sweep_N"] = list(self.sweep_N)
        return d


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
ALIASES = {"re": "Re", "k": "K", "n": "N", "out": "output_dir", "spectrum_n": "spectrum_n"}


def _parse_float(text: str) -> float:
    s = text.strip().lower()
    if s in ("inf", "infinity", "inviscid"):
        return math.inf
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        return float(s)


def _parse_bool(text: str) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def coerce(key: str, value):
    """Convert a raw (string or native) value to the type of config field ``key``."""
    name = ALIASES.get(key, key)
    if name not in FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    default = FIELDS[name].default
    try:
        if isinstance(value, str):
            if isinstance(default, bool):
                return name, _parse_bool(value)
            if isinstance(default, int):
                return name, int(value)
            if isinstance(default, float):
                return name, _parse_float(value)
            if isinstance(default, tuple):
                return name, tuple(int(v) for v in value.replace(",", " ").split())
            return name, value.strip()
        if isinstance(default, tuple):
            return name, tuple(int(v) for v in value)
        if isinstance(default, float):
            return name, float(value)
        return name, value
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {value!r} ({exc})") from None


def read_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        name, parsed = coerce(key, value)
        out[name] = parsed
    return out


def parse_config(path=None, **overrides) -> RunConfig:
    """Resolve a config: case defaults, then file values, then explicit overrides.

    ``None`` overrides are ignored so argparse namespaces can be passed as is.
    """
    given = read_config_file(path) if path else {}
    for key, value in overrides.items():
        if value is None:
            continue
        name, parsed = coerce(key, value)
        given[name] = parsed
    case = given.get("case", RunConfig.case)
    if case not in CASES:
        raise ConfigError(f"case: unknown case {case!r}; choose from {sorted(CASES)}")
    values = dict(get_case(case).defaults)
    values.update(given)
    values["case"] = case
    return RunConfig(**values).validate()
