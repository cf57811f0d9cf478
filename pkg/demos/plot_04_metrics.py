"""
Regression metrics and fold averages
====================================

MAPE, RMSE, R^2 and NRMSE on physical-unit predictions, and the
fold-weighted average row of a cross-validation table.
"""

from semlp.metrics import MetricReport, fold_aggregate, mape, nrmse, r2, rmse

# single-pair relative errors of a field test
print(f"{mape([31734], [33750]):.2f}%  {mape([30682], [33750]):.2f}%  {mape([0.72], [0.77]):.2f}%")

# small hand-checkable vectors
print("rmse", rmse([1, 9], [0, 10]), " nrmse", nrmse([1, 9], [0, 10]), " r2", r2([2, 0], [0, 2]))

# a per-fold report and the average of several folds
folds = [
    MetricReport.compute([[100.0, 1.0], [205.0, 2.1], [290.0, 2.9]], [[100.0, 1.0], [200.0, 2.0], [300.0, 3.0]]),
    MetricReport.compute([[110.0, 1.1], [190.0, 1.9], [300.0, 3.0]], [[100.0, 1.0], [200.0, 2.0], [300.0, 3.0]]),
]
for i, f in enumerate(folds, start=1):
    print(f"{i}-Fold", {k: round(v, 4) for k, v in f.row().items()})
print("Average", {k: round(v, 4) for k, v in fold_aggregate(folds).row().items()})
