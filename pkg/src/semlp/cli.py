"""Command-line entry point: ``semlp <subcommand> [options]``.

Subcommands: gen-data, train, predict, evaluate, ablate, gradcheck. Every
command validates its configuration before touching the filesystem, writes
outputs atomically, and exits non-zero on any failure.
"""

import argparse
import hashlib
import json
import os
import sys
import warnings

import numpy as np

from . import gradcheck as gradcheck_mod
from . import reports
from .config import FORMATS, dump_run_config, load_run_config
from .core_net import EVAL
from .data import (
    FEATURES,
    Condition,
    FoldSplit,
    denormalize_outputs,
    file_sha256,
    generate_dataset,
    kfold_split,
    normalize_matrix,
    read_dataset,
    write_dataset,
)
from .errors import ConfigError, DimensionError, ExtrapolationWarning
from .metrics import MetricReport
from .se_mlp import VARIANTS
from .serialization import (
    atomic_write_bytes,
    load_model,
    persist_norm_params,
    save_model,
)
from .training import ablation_suite, cross_validate, evaluate_model

DATASET_NAME = "dataset.csv"


def _write_text(path, text):
    atomic_write_bytes(path, text.encode())


def _sha256_text(text):
    return hashlib.sha256(text.encode()).hexdigest()


def _manifest(path, obj):
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _run_config(args):
    cfg = load_run_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.apply_seed(args.seed)
    else:
        cfg.apply_seed(cfg.seed)
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    if getattr(args, "format", None):
        cfg.format = args.format
    if getattr(args, "no_noise", False):
        cfg.generator.noise_enabled = False
    return cfg.validate()


def _emit(text, out=None):
    out = out or sys.stdout
    out.write(text)
    out.flush()


# ---- subcommands -----------------------------------------------------------------


def cmd_gen_data(args):
    cfg = _run_config(args)
    dataset = generate_dataset(cfg.grid, cfg.generator)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, DATASET_NAME)
    tmp = path + ".partial"
    write_dataset(dataset, tmp)
    os.replace(tmp, path)
    digest = file_sha256(path)
    _manifest(
        os.path.join(args.out, "dataset.manifest.json"),
        {
            "seed": cfg.seed,
            "grid": cfg.grid.to_dict(),
            "generator": cfg.generator.to_dict(),
            "samples": len(dataset),
            "sha256": digest,
        },
    )
    _emit(f"wrote {len(dataset)} samples to {path} (sha256 {digest})\n")
    return 0


def _load_data(path):
    if not os.path.exists(path):
        raise ConfigError(f"dataset {path} does not exist")
    return read_dataset(path)


def cmd_train(args):
    cfg = _run_config(args)
    dataset = _load_data(args.data)
    data_sha = file_sha256(args.data)
    cv = cross_validate(dataset, cfg.train, cfg.model_config(), n_jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    folds = []
    for r in cv.folds:
        model_name = f"fold_{r.fold}.model"
        norm_name = f"fold_{r.fold}.norm"
        persist_norm_params(r.model.norm_params, os.path.join(args.out, norm_name))
        save_model(r.model, os.path.join(args.out, model_name))
        folds.append(
            {
                "fold": r.fold,
                "model": model_name,
                "model_sha256": file_sha256(os.path.join(args.out, model_name)),
                "norm_params": norm_name,
                "norm_params_sha256": file_sha256(os.path.join(args.out, norm_name)),
                "best_epoch": r.train_report.best_epoch,
            }
        )
    split = kfold_split(dataset, cfg.train.k, cfg.train.seed)
    _write_text(os.path.join(args.out, "folds.json"), json.dumps(split.to_dict()) + "\n")
    csv_text = reports.cv_report_csv(cv)
    json_text = reports.cv_report_json(cv)
    _write_text(os.path.join(args.out, "report.csv"), csv_text)
    _write_text(os.path.join(args.out, "report.json"), json_text)
    _write_text(os.path.join(args.out, "run.cfg"), dump_run_config(cfg))
    _manifest(
        os.path.join(args.out, "manifest.json"),
        {
            "dataset": os.path.abspath(args.data),
            "dataset_sha256": data_sha,
            "variant": cv.variant,
            "seed": cfg.seed,
            "split_sha256": cv.split_sha256,
            "folds": folds,
            "report_csv_sha256": _sha256_text(csv_text),
        },
    )
    _emit(csv_text if cfg.format == "csv" else json_text)
    return 0


def _norm_path(args):
    if args.norm:
        return args.norm
    base, _ = os.path.splitext(args.model)
    return base + ".norm"


def _load_paired(args):
    norm = _norm_path(args)
    if not os.path.exists(norm):
        raise ConfigError(f"norm-params file {norm} not found; refusing to predict without scales")
    return load_model(args.model, norm)


def cmd_predict(args):
    c = Condition(args.mass, args.velocity, args.grade, args.layers)
    if not (c.warhead_mass > 0 and c.velocity > 0 and c.material_grade > 0 and c.layer_count >= 1):
        raise ConfigError(f"invalid condition {c}")
    if not 1 <= args.layer_index <= c.layer_count:
        raise ConfigError(f"layer index {args.layer_index} outside 1..{c.layer_count}")
    model = _load_paired(args)
    row = np.array([[c.warhead_mass, c.velocity, c.material_grade, c.layer_count, args.layer_index]])
    x = normalize_matrix(row, model.norm_params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        y = model.forward(x, EVAL)
    peak, width = denormalize_outputs(y, model.norm_params)[0]
    result = {"peak_g": float(peak), "width_ms": float(width)}
    if args.format == "json":
        _emit(json.dumps(result) + "\n")
    else:
        _emit(f"peak = {peak:.6g} g\nwidth = {width:.6g} ms\n")
    return 0


def cmd_evaluate(args):
    fmt = args.format or "csv"
    dataset = _load_data(args.data)
    model = _load_paired(args)
    if model.config.input_dim != len(FEATURES):
        raise DimensionError(
            f"model expects {model.config.input_dim} input features but the dataset provides "
            f"{len(FEATURES)}"
        )
    label = "all"
    if args.folds:
        with open(args.folds) as fh:
            split = FoldSplit.from_dict(json.load(fh))
        if not 1 <= args.fold <= split.k:
            raise ConfigError(f"--fold must lie in 1..{split.k}")
        if max(int(i) for f in split.folds for i in f) >= len(dataset):
            raise ConfigError("fold indices do not match the dataset")
        dataset = [dataset[i] for i in split.folds[args.fold - 1]]
        label = f"{args.fold}-Fold"
    report = evaluate_model(model, dataset)
    csv_text = reports.metric_report_csv(report, label)
    json_text = reports.metric_report_json(report, label)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_text(os.path.join(args.out, "evaluation.csv"), csv_text)
        _write_text(os.path.join(args.out, "evaluation.json"), json_text)
    _emit(csv_text if fmt == "csv" else json_text)
    return 0


def cmd_ablate(args):
    cfg = _run_config(args)
    dataset = _load_data(args.data)
    results = ablation_suite(dataset, cfg.train, cfg.model, n_jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    csv_text = reports.ablation_csv(results)
    json_text = reports.ablation_json(results)
    _write_text(os.path.join(args.out, "ablation.csv"), csv_text)
    _write_text(os.path.join(args.out, "ablation.json"), json_text)
    for variant, cv in results.items():
        _emit(f"# {variant}: shared split sha256 {cv.split_sha256}\n", sys.stderr)
    _emit(csv_text if cfg.format == "csv" else json_text)
    return 0


def cmd_gradcheck(args):
    report = gradcheck_mod.run_suite(range(args.seeds))
    for line in report.lines():
        _emit(line + "\n")
    for r in report.failures():
        _emit(f"gradient check failed for layer {r.name}: parameter {r.param}\n", sys.stderr)
    return 0 if report.passed else 1


# ---- argument parsing ----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="semlp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, variant=False):
        sp.add_argument("--config", help="plain-text run configuration file")
        sp.add_argument("--seed", type=int, help="top-level seed for every random stream")
        sp.add_argument("--format", choices=FORMATS, help="format of the report printed to stdout")
        if variant:
            sp.add_argument("--variant", choices=sorted(VARIANTS))

    sp = sub.add_parser("gen-data", help="generate the synthetic surrogate dataset")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--no-noise", action="store_true", help="disable generator noise")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="K-fold training; writes per-fold models and a report")
    common(sp, variant=True)
    sp.add_argument("--data", required=True, help="dataset CSV")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--jobs", type=int, default=1, help="folds trained in parallel")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="predict peak and width for one layer")
    sp.add_argument("--model", required=True)
    sp.add_argument("--norm", help="norm-params file (default: model path with .norm suffix)")
    sp.add_argument("--mass", type=float, required=True, help="warhead mass, kg")
    sp.add_argument("--velocity", type=float, required=True, help="impact velocity, m/s")
    sp.add_argument("--grade", type=int, required=True, help="concrete grade, e.g. 40 for C40")
    sp.add_argument("--layers", type=int, required=True, help="number of target layers")
    sp.add_argument("--layer-index", type=int, required=True, help="1-based layer index")
    sp.add_argument("--format", choices=FORMATS, default="csv")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="metrics of a saved model on a dataset or fold")
    sp.add_argument("--model", required=True)
    sp.add_argument("--norm")
    sp.add_argument("--data", required=True)
    sp.add_argument("--folds", help="folds.json written by train")
    sp.add_argument("--fold", type=int, default=1, help="1-based fold whose validation split to use")
    sp.add_argument("--out", help="directory for evaluation.csv / evaluation.json")
    sp.add_argument("--format", choices=FORMATS)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("ablate", help="cross-validate MLP, MLP+SE and SE-MLP on shared folds")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    sp.add_argument("--seeds", type=int, default=20)
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ExtrapolationWarning)
            code = args.func(args)
        for w in caught:
            if issubclass(w.category, ExtrapolationWarning):
                _emit(f"warning: {w.message}\n", sys.stderr)
            else:
                warnings.showwarning(w.message, w.category, w.filename, w.lineno)
        return code
    except (ValueError, RuntimeError, OSError) as exc:
        _emit(f"error: {exc}\n", sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
