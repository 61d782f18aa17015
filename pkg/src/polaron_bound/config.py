"""Run configuration: a flat ``key = value`` file with command-line overrides."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """A configuration value is missing, malformed or out of range."""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


@dataclass(frozen=True)
class RunConfig:
    n: int = 8000
    r_max: float = 400.0
    scheme: str = "uniform"
    mixing: float = 0.5
    tol: float = 1e-10
    max_iter: int = 5000
    L_max: int = 12
    k_ladder: tuple[float, ...] = (20.0, 40.0, 80.0, 160.0)
    k_cutoff: float = math.inf
    delta: float = 0.0
    eta: float = 1.0
    alphas: tuple[float, ...] = (5.0, 10.0, 20.0, 40.0)
    p_list: tuple[float, ...] = (0.0, 2e-4, 4e-4, 6e-4, 8e-4, 1e-3)
    c: float = 1.0
    weights_L_max: int = 60
    out: str = "out"
    seed: int = 12345
    workers: int = 1
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.n < 16:
            raise ConfigError("n must be at least 16")
        if not (self.r_max > 0 and math.isfinite(self.r_max)):
            raise ConfigError("r_max must be positive and finite")
        if self.scheme not in ("uniform", "log-uniform"):
            raise ConfigError(f"unknown grid scheme {self.scheme!r}")
        if not (0 < self.mixing <= 1):
            raise ConfigError("mixing must lie in (0, 1]")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive")
        if self.L_max < 2:
            raise ConfigError("L_max must be at least 2")
        if self.weights_L_max < 2:
            raise ConfigError("weights_L_max must be at least 2")
        for name in ("k_ladder", "alphas"):
            vals = getattr(self, name)
            if not vals:
                raise ConfigError(f"{name} must not be empty")
            if any(v <= 0 for v in vals):
                raise ConfigError(f"{name} entries must be positive")
            if any(b <= a for a, b in zip(vals[:-1], vals[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
        if not self.k_cutoff > 0:
            raise ConfigError("k_cutoff must be positive")
        if not (0 <= self.delta < 1):
            raise ConfigError("delta must lie in [0, 1)")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if not self.c > 0:
            raise ConfigError("c must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d["k_cutoff"] = "inf" if math.isinf(self.k_cutoff) else self.k_cutoff
        d["k_ladder"] = list(self.k_ladder)
        d["alphas"] = list(self.alphas)
        d["p_list"] = list(self.p_list)
        return d

    def solver_key(self) -> dict:
        """The fields that determine the solved field."""
        return {k: getattr(self, k) for k in ("n", "r_max", "scheme", "mixing", "tol", "max_iter")}


_TYPES = {f.name: f.type for f in fields(RunConfig) if f.name != "extra"}


def _coerce(key: str, text: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "str":
            return text
        if kind.startswith("tuple"):
            return _floats(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    raise ConfigError(f"unsupported field type for {key}")


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, val)
    return values


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file, then explicit overrides (``None`` values skipped)."""
    values: dict = {}
    if path is not None:
        try:
            values.update(parse_config(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in _TYPES:
            raise ConfigError(f"unknown key {k!r}")
        values[k] = _coerce(k, v) if isinstance(v, str) else v
    return replace(RunConfig(), **values) if values else RunConfig()


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for k, v in cfg.as_dict().items():
        if isinstance(v, list):
            v = ", ".join(repr(float(x)) for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
