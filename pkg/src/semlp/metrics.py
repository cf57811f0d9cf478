"""Regression metrics (MAPE, RMSE, R^2, NRMSE) and their per-fold aggregation."""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, DomainError

TARGET_NAMES = ("peak", "width")
METRIC_NAMES = ("mape", "rmse", "r2", "nrmse")


def _pair(pred, true):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    true = np.asarray(true, dtype=np.float64).ravel()
    if pred.shape != true.shape:
        raise DimensionError(f"prediction shape {pred.shape} does not match truth shape {true.shape}")
    if pred.size == 0:
        raise DomainError("metrics need at least one sample")
    return pred, true


def mape(pred, true):
    """Mean absolute percentage error, in percent. Zero truths are an error, not skipped."""
    pred, true = _pair(pred, true)
    if np.any(true == 0):
        raise DomainError("MAPE is undefined when a true value is zero")
    return float(np.mean(np.abs(pred - true) / np.abs(true)) * 100.0)


def rmse(pred, true):
    pred, true = _pair(pred, true)
    return float(np.sqrt(np.mean((pred - true) ** 2)))


def r2(pred, true):
    pred, true = _pair(pred, true)
    if true.size < 2:
        raise DomainError("R^2 needs at least two samples")
    ss_tot = float(np.sum((true - true.mean()) ** 2))
    if ss_tot == 0.0:
        raise DomainError("R^2 is undefined for a constant true vector (zero variance)")
    return 1.0 - float(np.sum((pred - true) ** 2)) / ss_tot


def nrmse(pred, true):
    """RMSE divided by the range of the true values of the evaluated set."""
    pred, true = _pair(pred, true)
    span = float(true.max() - true.min())
    if span == 0.0:
        raise DomainError("NRMSE is undefined when the true values have zero range")
    return rmse(pred, true) / span


@dataclass(frozen=True)
class TargetMetrics:
    mape: float
    rmse: float
    r2: float
    nrmse: float
    n: int
    y_min: float
    y_max: float

    @classmethod
    def compute(cls, pred, true):
        pred, true = _pair(pred, true)
        return cls(
            mape=mape(pred, true),
            rmse=rmse(pred, true),
            r2=r2(pred, true),
            nrmse=nrmse(pred, true),
            n=int(true.size),
            y_min=float(true.min()),
            y_max=float(true.max()),
        )


@dataclass(frozen=True)
class MetricReport:
    """Metrics in physical units: peak in g, width in ms."""

    peak: TargetMetrics
    width: TargetMetrics

    @classmethod
    def compute(cls, pred, true):
        pred = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
        true = np.asarray(true, dtype=np.float64).reshape(-1, 2)
        return cls(
            TargetMetrics.compute(pred[:, 0], true[:, 0]),
            TargetMetrics.compute(pred[:, 1], true[:, 1]),
        )

    def row(self):
        """Flat ``{peak_mape, peak_rmse, ..., width_nrmse}`` dict in table column order."""
        return {
            f"{t}_{m}": getattr(getattr(self, t), m) for t in TARGET_NAMES for m in METRIC_NAMES
        }

    def to_dict(self):
        return {t: asdict(getattr(self, t)) for t in TARGET_NAMES}


def fold_aggregate(reports):
    """Arithmetic mean of every metric across folds (each fold weighs the same).

    ``n`` becomes the total sample count and the range spans all folds.
    """
    reports = list(reports)
    if not reports:
        raise DomainError("cannot aggregate an empty list of reports")
    out = {}
    for t in TARGET_NAMES:
        parts = [getattr(r, t) for r in reports]
        vals = {m: math.fsum(getattr(p, m) for p in parts) / len(parts) for m in METRIC_NAMES}
        out[t] = TargetMetrics(
            n=sum(p.n for p in parts),
            y_min=min(p.y_min for p in parts),
            y_max=max(p.y_max for p in parts),
            **vals,
        )
    return MetricReport(**out)

