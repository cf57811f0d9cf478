"""Plain-text run configuration (INI sections, one ``key = value`` per field).

Sections map onto the config dataclasses::

    [run]        seed, variant, format
    [grid]       GridConfig fields
    [generator]  GeneratorConfig fields
    [train]      TrainConfig fields
    [model]      SEMLPConfig fields

Tuple-valued fields are written as comma-separated numbers. Every section and
key is optional when reading; unknown keys are rejected.
"""

import configparser
from dataclasses import dataclass, field, fields

from .data import GeneratorConfig, GridConfig
from .errors import ConfigError
from .se_mlp import VARIANTS, SEMLPConfig
from .training import TrainConfig

FORMATS = ("csv", "json")


@dataclass
class RunConfig:
    seed: int = 0
    variant: str = "se-mlp"
    format: str = "csv"
    grid: GridConfig = field(default_factory=GridConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: SEMLPConfig = field(default_factory=SEMLPConfig)

    def apply_seed(self, seed):
        """One top-level seed drives generation noise, splits, init, shuffling and dropout."""
        self.seed = int(seed)
        self.generator.seed = self.seed
        self.train.seed = self.seed
        return self

    def model_config(self):
        use_se, use_residual = VARIANTS[self.variant]
        return SEMLPConfig(**{**self.model.to_dict(), "use_se": use_se, "use_residual": use_residual})

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {sorted(VARIANTS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        self.grid.validate()
        self.generator.validate()
        self.train.validate()
        self.model_config().validate()
        return self


_SECTIONS = ("grid", "generator", "train", "model")


def _parse(raw, default, where):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            return tuple(kind(part) for part in raw.split(",") if part.strip())
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _fmt(value):
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_run_config(path=None):
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section == "run":
            target = cfg
            names = {"seed", "variant", "format"}
        elif section in _SECTIONS:
            target = getattr(cfg, section)
            names = {f.name for f in fields(target)}
        else:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in names:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            default = getattr(target, key)
            setattr(target, key, _parse(raw, default, f"{path} [{section}] {key}"))
    # dataclass __post_init__ normalization for tuple fields
    cfg.grid = GridConfig(**{f.name: getattr(cfg.grid, f.name) for f in fields(cfg.grid)})
    cfg.train = TrainConfig(**{f.name: getattr(cfg.train, f.name) for f in fields(cfg.train)})
    cfg.model = SEMLPConfig(**{f.name: getattr(cfg.model, f.name) for f in fields(cfg.model)})
    return cfg


def dump_run_config(cfg):
    lines = ["[run]", f"seed = {cfg.seed}", f"variant = {cfg.variant}", f"format = {cfg.format}"]
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        lines.append("")
        lines.append(f"[{section}]")
        lines.extend(f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in fields(obj))
    return "\n".join(lines) + "\n"
