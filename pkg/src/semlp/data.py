"""Samples, scale normalization, the synthetic surrogate generator, CSV I/O and K-fold splits.

A sample is one penetrated layer of one working condition. Its five model
inputs are, in order: warhead mass (kg), impact velocity (m/s), concrete
grade (the number in C40/C60/C80), number of layers in the target, and the
1-based index of the layer. Targets are the layer's acceleration peak in g
and pulse width in ms.
"""

import csv
import hashlib
import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .core_net import make_rng
from .errors import (
    ConfigError,
    DatasetParseError,
    DomainError,
    ExtrapolationWarning,
    GenerationError,
    NormalizationError,
    SplitError,
)

FEATURES = ("mass_kg", "velocity_mps", "grade", "layer_count", "layer_index")
TARGETS = ("peak_g", "width_ms")
CSV_HEADER = FEATURES + TARGETS

VELOCITY_RANGE = (900.0, 1700.0)
LAYER_COUNT_RANGE = (6, 10)
GRADES = (40, 60, 80)
GRAVITY = 9.81

# random stream keys; every consumer derives its generator from the run seed
STREAM_NOISE = 0
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_DROPOUT = 3
STREAM_FOLDS = 4


@dataclass(frozen=True)
class Condition:
    warhead_mass: float
    velocity: float
    material_grade: int
    layer_count: int

    def validate(self):
        lo, hi = VELOCITY_RANGE
        if not lo <= self.velocity <= hi:
            raise ConfigError(f"velocity {self.velocity} m/s is outside [{lo:g}, {hi:g}]")
        lo, hi = LAYER_COUNT_RANGE
        if not lo <= self.layer_count <= hi:
            raise ConfigError(f"layer_count {self.layer_count} is outside [{lo}, {hi}]")
        if not self.warhead_mass > 0:
            raise ConfigError(f"warhead mass must be positive, got {self.warhead_mass}")
        if self.material_grade not in GRADES:
            raise ConfigError(f"material grade must be one of {GRADES}, got {self.material_grade}")
        return self


@dataclass(frozen=True)
class LayerSample:
    condition: Condition
    layer_index: int
    peak: float
    width: float

    def validate(self):
        if not 1 <= self.layer_index <= self.condition.layer_count:
            raise ValueError(
                f"layer_index {self.layer_index} outside 1..{self.condition.layer_count}"
            )
        if not self.peak > 0:
            raise ValueError(f"peak must be positive, got {self.peak}")
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")
        return self

    def features(self):
        c = self.condition
        return (c.warhead_mass, c.velocity, c.material_grade, c.layer_count, self.layer_index)


def feature_matrix(samples):
    return np.array([s.features() for s in samples], dtype=np.float64).reshape(-1, len(FEATURES))


def target_matrix(samples):
    return np.array([(s.peak, s.width) for s in samples], dtype=np.float64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormParams:
    """Scale constants fitted on a training partition.

    ``log_max`` is ``max(ln(1 + peak))`` and ``width_max`` is ``max(width)``.
    """

    x_min: tuple
    x_max: tuple
    log_max: float
    width_max: float

    def __post_init__(self):
        object.__setattr__(self, "x_min", tuple(float(v) for v in self.x_min))
        object.__setattr__(self, "x_max", tuple(float(v) for v in self.x_max))
        object.__setattr__(self, "log_max", float(self.log_max))
        object.__setattr__(self, "width_max", float(self.width_max))

    def validate(self):
        if len(self.x_min) != len(self.x_max):
            raise NormalizationError("x_min and x_max have different lengths")
        for name, lo, hi in zip(FEATURES, self.x_min, self.x_max):
            if not hi > lo:
                raise NormalizationError(
                    f"feature {name!r} is degenerate: x_max={hi} is not above x_min={lo}"
                )
        if not self.log_max > 0:
            raise NormalizationError(f"log_max must be positive, got {self.log_max}")
        if not self.width_max > 0:
            raise NormalizationError(f"width_max must be positive, got {self.width_max}")
        return self

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(
            x_min=d["x_min"], x_max=d["x_max"], log_max=d["log_max"], width_max=d["width_max"]
        )


def fit_norm_params(samples):
    """Fit every scale constant on ``samples`` (pass the training partition only)."""
    if len(samples) == 0:
        raise NormalizationError("cannot fit normalization parameters on an empty set")
    x = feature_matrix(samples)
    y = target_matrix(samples)
    params = NormParams(
        x_min=x.min(axis=0),
        x_max=x.max(axis=0),
        log_max=float(np.log1p(y[:, 0]).max()),
        width_max=float(y[:, 1].max()),
    )
    return params.validate()


def _require(np_):
    if np_ is None:
        raise NormalizationError("normalization parameters are missing; refusing to guess scales")
    return np_


def normalize_matrix(x, np_, warn=True):
    """Min-max scale a (N, 5) feature matrix. Out-of-range rows are kept but flagged."""
    np_ = _require(np_)
    lo = np.asarray(np_.x_min)
    hi = np.asarray(np_.x_max)
    x = np.asarray(x, dtype=np.float64)
    out = (x - lo) / (hi - lo)
    if warn and (np.any(x < lo) or np.any(x > hi)):
        warnings.warn(
            "inputs fall outside the fitted training range; the prediction is an extrapolation",
            ExtrapolationWarning,
            stacklevel=2,
        )
    return out


def normalize_features(c, layer_index, np_):
    row = np.array(
        [[c.warhead_mass, c.velocity, c.material_grade, c.layer_count, layer_index]],
        dtype=np.float64,
    )
    return normalize_matrix(row, np_)[0]


def normalize_peak(y_acc, np_):
    np_ = _require(np_)
    y = np.asarray(y_acc, dtype=np.float64)
    if np.any(y < 0):
        raise DomainError("acceleration peak must be non-negative")
    out = np.log1p(y) / np_.log_max
    return float(out) if out.ndim == 0 else out


def normalize_width(y_width, np_):
    np_ = _require(np_)
    y = np.asarray(y_width, dtype=np.float64)
    if np.any(y < 0):
        raise DomainError("pulse width must be non-negative")
    out = y / np_.width_max
    return float(out) if out.ndim == 0 else out


def normalize_targets(y, np_):
    y = np.asarray(y, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([normalize_peak(y[:, 0], np_), normalize_width(y[:, 1], np_)])


def denormalize_outputs(y_norm, np_):
    """Invert the target scaling. Accepts a pair or an (N, 2) array; returns the same shape."""
    np_ = _require(np_)
    y = np.asarray(y_norm, dtype=np.float64)
    flat = y.reshape(-1, 2)
    out = np.column_stack([np.expm1(flat[:, 0] * np_.log_max), flat[:, 1] * np_.width_max])
    return out.reshape(y.shape)


# ---------------------------------------------------------------------------
# synthetic surrogate


@dataclass
class GridConfig:
    """Working-condition grid: masses x velocities x grades, in lexicographic order."""

    masses: tuple = (60.0, 150.0, 300.0, 600.0)
    velocity_min: float = 900.0
    velocity_max: float = 1700.0
    velocity_step: float = 100.0
    grades: tuple = GRADES
    layer_counts: tuple = (6, 7, 8, 9, 10)

    def __post_init__(self):
        self.masses = tuple(float(m) for m in self.masses)
        self.grades = tuple(int(g) for g in self.grades)
        self.layer_counts = tuple(int(n) for n in self.layer_counts)

    def velocities(self):
        if self.velocity_step <= 0:
            raise ConfigError("velocity_step must be positive")
        n = int(math.floor((self.velocity_max - self.velocity_min) / self.velocity_step + 1e-9))
        return tuple(self.velocity_min + i * self.velocity_step for i in range(n + 1))

    def validate(self):
        lo, hi = VELOCITY_RANGE
        if not (lo <= self.velocity_min <= self.velocity_max <= hi):
            raise ConfigError(
                f"velocity range [{self.velocity_min:g}, {self.velocity_max:g}] "
                f"is not inside [{lo:g}, {hi:g}]"
            )
        if not self.masses or not self.grades or not self.layer_counts:
            raise ConfigError("grid axes must be non-empty")
        for c in self.conditions(validate=False):
            c.validate()
        return self

    def conditions(self, validate=True):
        """Cross product in lexicographic order; layer counts cycle with the 1-based index."""
        out = []
        cycle = self.layer_counts
        combos = itertools.product(self.masses, self.velocities(), self.grades)
        for n, (m, v, g) in enumerate(combos, start=1):
            c = Condition(m, v, g, cycle[n % len(cycle)])
            out.append(c.validate() if validate else c)
        return out

    def to_dict(self):
        d = asdict(self)
        for k in ("masses", "grades", "layer_counts"):
            d[k] = list(d[k])
        return d


@dataclass
class GeneratorConfig:
    """Constants of the closed-form surrogate. Not a physical penetration model.

    Layer ``k`` is hit at speed ``v_k`` (``v_1`` = impact velocity) and yields::

        peak_k  = C_p * grade**0.4 * v_k**velocity_exponent * (1 + hardening*(k-1)) / mass**0.33
        width_k = C_w * 1000 * t_k / v_k
        v_{k+1} = sqrt(v_k**2 - 2 * 9.81 * peak_k * t_k)

    with ``t_1 = first_thickness`` and ``t_k = other_thickness`` afterwards.
    """

    C_p: float = 0.04022
    C_w: float = 2.4
    hardening: float = 0.1
    velocity_exponent: float = 2.0
    first_thickness: float = 0.30
    other_thickness: float = 0.18
    noise_sigma_peak: float = 0.03
    noise_sigma_width: float = 0.02
    noise_enabled: bool = True
    v_min: float = 50.0
    seed: int = 0

    def validate(self):
        positive = (
            "C_p", "C_w", "hardening", "velocity_exponent",
            "first_thickness", "other_thickness", "v_min",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"generator field {name} must be positive")
        for name in ("noise_sigma_peak", "noise_sigma_width"):
            if getattr(self, name) < 0:
                raise ConfigError(f"generator field {name} must be non-negative")
        return self

    def to_dict(self):
        return asdict(self)


def layer_response(c, g):
    """Noise-free per-layer ``[(peak, width, v_in)]`` for one condition.

    Raises :class:`GenerationError` if the projectile would leave any layer
    slower than ``g.v_min``.
    """
    out = []
    v = float(c.velocity)
    for k in range(1, c.layer_count + 1):
        t = g.first_thickness if k == 1 else g.other_thickness
        peak = (
            g.C_p
            * c.material_grade ** 0.4
            * v ** g.velocity_exponent
            * (1.0 + g.hardening * (k - 1))
            / c.warhead_mass ** 0.33
        )
        width = g.C_w * 1000.0 * t / v
        out.append((peak, width, v))
        v_sq = v * v - 2.0 * GRAVITY * peak * t
        if v_sq < g.v_min ** 2:
            raise GenerationError(
                f"projectile stops in layer {k} of condition mass={c.warhead_mass:g} kg, "
                f"velocity={c.velocity:g} m/s, grade=C{c.material_grade}, "
                f"layers={c.layer_count}: exit speed below v_min={g.v_min:g} m/s"
            )
        v = math.sqrt(v_sq)
    return out


def generate_dataset(grid=None, g=None):
    """Build one :class:`LayerSample` per (condition, layer) over the grid.

    Noise is multiplicative log-normal, ``x * exp(sigma * N(0, 1))``, drawn per
    target from the seeded stream in (condition, layer, peak-then-width)
    order. It perturbs the reported targets only; the velocity recursion
    always uses the noise-free peak.
    """
    grid = (grid or GridConfig()).validate()
    g = (g or GeneratorConfig()).validate()
    rng = make_rng(g.seed, STREAM_NOISE)
    samples = []
    for c in grid.conditions():
        for k, (peak, width, _) in enumerate(layer_response(c, g), start=1):
            if g.noise_enabled:
                z = rng.standard_normal(2)
                peak *= math.exp(g.noise_sigma_peak * z[0])
                width *= math.exp(g.noise_sigma_width * z[1])
            samples.append(LayerSample(c, k, peak, width))
    return samples


# ---------------------------------------------------------------------------
# splits


@dataclass
class FoldSplit:
    folds: list = field(default_factory=list)

    @property
    def k(self):
        return len(self.folds)

    def pairs(self):
        """``[(train_idx, val_idx), ...]``, one pair per fold."""
        out = []
        for i, val in enumerate(self.folds):
            train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
            out.append((train, val))
        return out

    def checksum(self):
        h = hashlib.sha256()
        for f in self.folds:
            h.update(np.asarray(f, dtype="<i8").tobytes())
            h.update(b"|")
        return h.hexdigest()

    def to_dict(self):
        return {"k": self.k, "folds": [[int(i) for i in f] for f in self.folds]}

    @classmethod
    def from_dict(cls, d):
        return cls([np.asarray(f, dtype=np.int64) for f in d["folds"]])


def kfold_split(dataset, k=4, seed=0):
    n = len(dataset)
    if k < 2:
        raise SplitError(f"K must be at least 2, got {k}")
    if n < k:
        raise SplitError(f"cannot split {n} samples into {k} folds")
    perm = make_rng(seed, STREAM_FOLDS).permutation(n)
    return FoldSplit([np.sort(part) for part in np.array_split(perm, k)])


# ---------------------------------------------------------------------------
# CSV


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_dataset(dataset, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in dataset:
            c = s.condition
            w.writerow(
                [
                    _fmt(float(c.warhead_mass)),
                    _fmt(float(c.velocity)),
                    _fmt(int(c.material_grade)),
                    _fmt(int(c.layer_count)),
                    _fmt(int(s.layer_index)),
                    _fmt(float(s.peak)),
                    _fmt(float(s.width)),
                ]
            )


def _as_int(text):
    v = float(text)
    if not v.is_integer():
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def read_dataset(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetParseError(f"{path}: empty file, no header and no samples")
    header = [h.strip() for h in rows[0]]
    missing = [h for h in CSV_HEADER if h not in header]
    if missing:
        raise DatasetParseError(f"{path}: missing columns {missing}")
    col = {h: header.index(h) for h in CSV_HEADER}
    samples, bad, reasons = [], [], []
    for rowno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        try:
            cell = lambda name: row[col[name]]  # noqa: E731
            c = Condition(
                float(cell("mass_kg")),
                float(cell("velocity_mps")),
                _as_int(cell("grade")),
                _as_int(cell("layer_count")),
            )
            s = LayerSample(
                c, _as_int(cell("layer_index")), float(cell("peak_g")), float(cell("width_ms"))
            )
            if not all(math.isfinite(v) for v in s.features() + (s.peak, s.width)):
                raise ValueError("non-finite value")
            s.validate()
            samples.append(s)
        except (ValueError, IndexError) as exc:
            bad.append(rowno)
            reasons.append(f"row {rowno}: {exc}")
    if bad:
        raise DatasetParseError(f"{path}: {len(bad)} invalid rows; " + "; ".join(reasons), bad)
    if not samples:
        raise DatasetParseError(f"{path}: dataset is empty")
    return samples


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
