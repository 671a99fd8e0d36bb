"""Experiment configuration: typed config object plus a key=value file parser.

The file format is deliberately plain so configs are diffable and
self-describing: one ``key = value`` pair per line, ``#`` comments,
blank lines ignored.  Lists (seeds) are comma-separated.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

EXPERIMENTS = ("dsgd", "local_sgd", "power_iter", "sublinear_sim")
QUANTIZERS = ("none", "lattice", "lattice_rotation", "qsgd_l2", "qsgd_range", "hadamard")
Y_RULES = ("fixed", "scale15", "scale3", "periodic16")
DATASETS = ("synthetic", "libsvm", "cpusmall")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    samples: int = 8192
    d: int = 100
    n: int = 2
    q: int = 8
    learning_rate: float = 0.1
    iterations: int = 30
    seeds: tuple[int, ...] = (0, 10, 20, 30, 40)
    quantizer: str = "lattice"
    y_rule: str = "scale15"
    y_fixed: float = 1.0
    dataset: str = "synthetic"
    data_path: str | None = None
    local_steps: int = 10
    warmup: int = 20
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        for name in ("samples", "d", "n", "q", "iterations", "local_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not (self.learning_rate > 0):
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.warmup < 0:
            raise ConfigError(f"warmup must be >= 0, got {self.warmup}")
        if len(self.seeds) == 0:
            raise ConfigError("seed list must be non-empty")
        if self.quantizer not in QUANTIZERS:
            raise ConfigError(f"quantizer must be one of {QUANTIZERS}, got {self.quantizer!r}")
        if self.y_rule not in Y_RULES:
            raise ConfigError(f"y_rule must be one of {Y_RULES}, got {self.y_rule!r}")
        if self.y_rule == "fixed" and not (self.y_fixed > 0):
            raise ConfigError(f"y_fixed must be positive, got {self.y_fixed}")
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.fmt not in FORMATS:
            raise ConfigError(f"fmt must be one of {FORMATS}, got {self.fmt!r}")

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key == "seeds":
        parts = [p for p in (s.strip() for s in raw.split(",")) if p]
        if not parts:
            raise ConfigError("seeds must be a non-empty comma-separated list")
        return tuple(int(p) for p in parts)
    if key in ("data_path", "out"):
        return None if raw in ("", "none", "None") else raw
    if key in ("learning_rate", "y_fixed"):
        return float(raw)
    if key in ("samples", "d", "n", "q", "iterations", "local_steps", "warmup"):
        return int(raw)
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse key=value text into a dict of coerced config values."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    return out


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)
