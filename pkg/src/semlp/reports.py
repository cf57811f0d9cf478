"""CSV and JSON renderings of metric reports.

Column names follow the fold-metric table layout in snake_case:
``peak_mape, peak_rmse, peak_r2, peak_nrmse, width_mape, ...``. MAPE is in
percent, peak RMSE in g and width RMSE in ms. Both renderings carry the same
numbers at full ``repr`` precision and contain no timestamps, so reruns are
byte-identical.
"""

import csv
import io
import json

from .metrics import METRIC_NAMES, TARGET_NAMES
from .se_mlp import VARIANT_LABELS

METRIC_COLUMNS = tuple(f"{t}_{m}" for t in TARGET_NAMES for m in METRIC_NAMES)
UNITS = {"peak_rmse": "g", "width_rmse": "ms", "peak_mape": "%", "width_mape": "%"}


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def cv_report_csv(cv):
    return _csv(("fold",) + METRIC_COLUMNS, cv.rows())


def cv_report_json(cv):
    return _json(
        {
            "variant": cv.variant,
            "label": VARIANT_LABELS[cv.variant],
            "split_sha256": cv.split_sha256,
            "units": UNITS,
            "rows": cv.rows(),
            "best_epochs": [f.train_report.best_epoch for f in cv.folds],
        }
    )


def ablation_rows(results):
    out = []
    for variant, cv in results.items():
        for row in cv.rows():
            out.append({"variant": variant, "label": VARIANT_LABELS[variant], **row})
    return out


def ablation_csv(results):
    return _csv(("variant", "label", "fold") + METRIC_COLUMNS, ablation_rows(results))


def ablation_json(results):
    blocks = []
    for variant, cv in results.items():
        blocks.append(
            {
                "variant": variant,
                "label": VARIANT_LABELS[variant],
                "split_sha256": cv.split_sha256,
                "rows": cv.rows(),
            }
        )
    return _json({"units": UNITS, "variants": blocks})


def metric_report_csv(report, label="evaluation"):
    return _csv(("split",) + METRIC_COLUMNS, [{"split": label, **report.row()}])


def metric_report_json(report, label="evaluation"):
    return _json({"split": label, "units": UNITS, "metrics": report.row(), "detail": report.to_dict()})
