"""Command-line interface.

Subcommands: synth, extract, train, predict, grid-search, ablation,
sweep, report.  Options can come from one JSON config file (--config)
with individual flags taking precedence.  Exit codes: 0 success,
1 configuration error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import sys

import numpy as np

from . import harness, jsonio
from .data import dataset_summary, generate_synthetic, default_templates, save_dataset
from .errors import ConfigError, DataError, GestureLabError, NumericalError
from .fusion import FusionConfig
from .harness import (
    DEFAULT_ABLATION_COMBOS,
    FeatureStore,
    ablation_table,
    build_feature_store,
    config_from_dict,
    emit_report,
    fusion_sweep,
    load_samples,
    run_experiment,
    worker_count,
    write_cv_table_csv,
    write_predictions_csv,
)
from .svm import (
    KernelParams,
    Preprocessing,
    classify,
    grid_search,
    load_model,
    save_model,
    train_multiclass,
)
from .tracking import FeatureMask


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse normally exits 2; that's our data code
        raise ConfigError(message)


def _parse_values(text):
    """Comma-separated floats/ints with 'none' allowed (for retentions)."""
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if token.lower() == "none":
            out.append(None)
        elif any(ch in token for ch in ".eE") and not token.lstrip("+-").isdigit():
            out.append(float(token))
        else:
            out.append(int(token))
    if not out:
        raise ConfigError(f"empty value list: {text!r}")
    return out


def _add_override_args(p):
    p.add_argument("--config", help="JSON experiment config file")
    p.add_argument("--manifest", help="dataset manifest path (overrides config)")
    p.add_argument("--features", help="tracking feature mask, e.g. ang+dist+tip")
    hog = p.add_mutually_exclusive_group()
    hog.add_argument("--use-hog", dest="use_hog", action="store_true", default=None)
    hog.add_argument("--no-hog", dest="use_hog", action="store_false", default=None)
    p.add_argument("--k-values", help="comma-separated fusion weights")
    p.add_argument("--retentions", help="comma-separated retentions (floats, ints, or none)")
    p.add_argument("--c-grid", help="comma-separated C grid")
    p.add_argument("--gamma-grid", help="comma-separated gamma grid")
    p.add_argument("--folds", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--seed", type=int, help="master experiment seed")
    p.add_argument("--grid-mode", choices=["per_cell", "per_repetition"])
    p.add_argument("--subjects", type=int, help="synthetic subjects (overrides config)")
    p.add_argument("--reps", type=int, help="synthetic repetitions per gesture")
    p.add_argument("--data-seed", type=int, help="synthetic dataset seed")
    p.add_argument("--undistort-map", help="calibration map file for raw images")


def _build_config(args, return_raw=False):
    raw = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
    cfg = config_from_dict(raw)

    synth = cfg.synthetic
    for attr, name in (("subjects", "subjects"), ("reps", "reps"), ("data_seed", "seed")):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(synth, name, value)
    simple = {
        "manifest": "manifest",
        "features": "features",
        "use_hog": "use_hog",
        "folds": "folds",
        "repetitions": "repetitions",
        "train_fraction": "train_fraction",
        "seed": "seed",
        "grid_mode": "grid_mode",
        "undistort_map": "undistort_map",
    }
    for attr, name in simple.items():
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, name, value)
    lists = {
        "k_values": "k_values",
        "retentions": "retentions",
        "c_grid": "c_grid",
        "gamma_grid": "gamma_grid",
    }
    for attr, name in lists.items():
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, name, tuple(_parse_values(value)))
    cfg.validate()
    return (cfg, raw) if return_raw else cfg


def _load_store(args, cfg):
    features_file = getattr(args, "features_file", None)
    if features_file:
        return _read_feature_store(features_file)
    samples = load_samples(cfg)
    return build_feature_store(samples, cfg)


def _read_feature_store(path):
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read feature file {path}: {exc}") from exc
    return FeatureStore(
        tracking=data["tracking"],
        hog=data["hog"] if "hog" in data.files else None,
        labels=data["labels"],
        sample_ids=[str(s) for s in data["sample_ids"]],
    )


def _write_feature_store(store, path):
    arrays = {
        "tracking": store.tracking,
        "labels": store.labels,
        "sample_ids": np.array(store.sample_ids),
    }
    if store.hog is not None:
        arrays["hog"] = store.hog
    np.savez_compressed(path, **arrays)


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_synth(args):
    templates = default_templates(
        pos_noise_mm=args.pos_noise, rot_noise_deg=args.rot_noise
    )
    samples = generate_synthetic(
        templates=templates,
        subjects=args.subjects,
        reps=args.reps,
        seed=args.seed,
        translation_mm=args.translation,
        image_size=args.image_size,
    )
    manifest = save_dataset(samples, args.out)
    counts = dataset_summary(samples)
    print(f"wrote {len(samples)} samples over {len(counts)} (subject, gesture) groups")
    print(f"manifest: {manifest}")
    return 0


def _cmd_extract(args):
    cfg = _build_config(args)
    samples = load_samples(cfg)
    store = build_feature_store(samples, cfg)
    _write_feature_store(store, args.out)
    hog_dim = 0 if store.hog is None else store.hog.shape[1]
    print(
        f"extracted {len(store.labels)} samples: tracking {store.tracking.shape[1]} dims, "
        f"hog {hog_dim} dims -> {args.out}"
    )
    return 0


def _fit_preprocessing(store, cfg, k, retention):
    from .fusion import fit_pca, fuse_matrix

    mask = FeatureMask.parse(cfg.features)
    tracking = store.tracking[:, mask.column_indices()]
    hog = store.hog if cfg.use_hog else None
    hog_dim = hog.shape[1] if hog is not None else 0
    fusion = FusionConfig(mask=mask, hog_weight=k if cfg.use_hog else 1.0, hog_dim=hog_dim)
    raw = np.hstack([tracking, hog]) if hog is not None else tracking.copy()
    pca = None
    if retention is not None:
        weighted = fuse_matrix(tracking, hog, fusion)
        if isinstance(retention, int) and not isinstance(retention, bool):
            pca = fit_pca(weighted, n_components=retention)
        else:
            pca = fit_pca(weighted, retained_fraction=float(retention))
    return raw, Preprocessing(fusion=fusion, pca=pca)


def _cmd_train(args):
    cfg = _build_config(args)
    store = _load_store(args, cfg)
    k = args.k if args.k is not None else (cfg.k_values[0] if cfg.k_values else 1.0)
    retention = _parse_values(args.retention)[0] if args.retention else cfg.retentions[0]
    raw, pre = _fit_preprocessing(store, cfg, k, retention)
    projected = pre.apply(raw)

    if args.c is not None and args.gamma is not None:
        params = KernelParams(c=args.c, gamma=args.gamma)
    else:
        params, _ = grid_search(
            projected,
            store.labels,
            cfg.c_grid,
            cfg.gamma_grid,
            folds=cfg.folds,
            seed=harness.derive_seed(cfg.seed, "grid:train"),
            tol=cfg.svm_tol,
            workers=worker_count(),
        )
        print(f"grid search selected C={params.c} gamma={params.gamma}")
    model = train_multiclass(
        projected,
        store.labels,
        params,
        tol=cfg.svm_tol,
        max_iter=cfg.svm_max_iter,
        preprocessing=pre,
        workers=worker_count(),
    )
    save_model(model, args.out)
    n_sv = sum(len(m.support_vectors) for m in model.models.values())
    print(
        f"trained {model.n_pairs} pair models on {len(store.labels)} samples "
        f"({n_sv} support vectors) -> {args.out}"
    )
    if not model.all_converged():
        print("warning: some pair models hit the iteration budget", file=sys.stderr)
        return 3
    return 0


def _cmd_predict(args):
    model = load_model(args.model)
    if model.preprocessing is None:
        raise DataError("model carries no preprocessing; cannot derive features")
    cfg = _build_config(args)
    cfg.use_hog = model.preprocessing.fusion.hog_dim > 0
    cfg.features = model.preprocessing.fusion.mask.label()
    store = _load_store(args, cfg)
    mask = model.preprocessing.fusion.mask
    tracking = store.tracking[:, mask.column_indices()]
    raw = np.hstack([tracking, store.hog]) if cfg.use_hog else tracking
    labels, votes = classify(model, raw)
    rows = [
        (store.sample_ids[i], int(store.labels[i]), int(labels[i]), int(votes[i]))
        for i in range(len(labels))
    ]
    write_predictions_csv(rows, args.out)
    accuracy = float(np.mean(labels == store.labels))
    print(f"predicted {len(labels)} samples, accuracy {accuracy:.4f} -> {args.out}")
    return 0


def _cmd_grid_search(args):
    cfg = _build_config(args)
    store = _load_store(args, cfg)
    k = args.k if args.k is not None else (cfg.k_values[0] if cfg.k_values else 1.0)
    retention = _parse_values(args.retention)[0] if args.retention else cfg.retentions[0]
    raw, pre = _fit_preprocessing(store, cfg, k, retention)
    params, table = grid_search(
        pre.apply(raw),
        store.labels,
        cfg.c_grid,
        cfg.gamma_grid,
        folds=cfg.folds,
        seed=harness.derive_seed(cfg.seed, "grid:cli"),
        tol=cfg.svm_tol,
        workers=worker_count(),
    )
    if args.out:
        write_cv_table_csv(table, args.out)
        print(f"cv table -> {args.out}")
    best = max(row["accuracy"] for row in table)
    print(f"best: C={params.c} gamma={params.gamma} cv-accuracy={best:.4f}")
    return 0


def _finish_report(report, out_dir):
    path = emit_report(report, out_dir)
    for combo, k, retention, mean, std in report.aggregate_rows():
        label = f"{combo} K={harness._fmt(k)} ret={harness._fmt(retention)}"
        print(f"{label}: mean accuracy {mean:.4f} (std {std:.4f})")
    print(f"report -> {path}")
    if not report.all_converged():
        print("warning: some models hit the iteration budget", file=sys.stderr)
        return 3
    return 0


def _cmd_ablation(args):
    cfg = _build_config(args)
    combos = (
        [c.strip() for c in args.combos.split(";")] if args.combos else DEFAULT_ABLATION_COMBOS
    )
    report = ablation_table(cfg, combos)
    return _finish_report(report, args.out_dir)


def _cmd_sweep(args):
    cfg, raw = _build_config(args, return_raw=True)
    if args.repetitions is None and "repetitions" not in raw:
        cfg.repetitions = 10  # sweeps default to fewer repetitions per cell
    report = fusion_sweep(cfg)
    return _finish_report(report, args.out_dir)


def _cmd_report(args):
    cfg = _build_config(args)
    report = run_experiment(cfg)
    return _finish_report(report, args.out_dir)


def _cmd_show_config(args):
    cfg = _build_config(args)
    from dataclasses import asdict

    data = asdict(cfg)
    data["image"]["undistort_size"] = list(data["image"]["undistort_size"])
    data["image"]["hog_size"] = list(data["image"]["hog_size"])
    print(jsonio.dumps(data))
    return 0


def build_parser():
    parser = _Parser(prog="gesturelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset on disk")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--subjects", type=int, default=13)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--pos-noise", type=float, default=3.0, help="fingertip noise sigma, mm")
    p.add_argument("--rot-noise", type=float, default=10.0, help="rotation noise sigma, deg")
    p.add_argument("--translation", type=float, default=100.0, help="translation half-range, mm")
    p.add_argument("--image-size", type=int, default=240)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("extract", help="extract features into an .npz file")
    _add_override_args(p)
    p.add_argument("--out", required=True, help="output .npz path")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", help="fit preprocessing and a multi-class model")
    _add_override_args(p)
    p.add_argument("--features-file", help="reuse features from an extract .npz")
    p.add_argument("--k", type=float, help="fusion weight for the HOG segment")
    p.add_argument("--retention", help="PCA retention (float fraction, int count, or none)")
    p.add_argument("--c", type=float, help="fixed C (skips grid search with --gamma)")
    p.add_argument("--gamma", type=float, help="fixed gamma (skips grid search with --c)")
    p.add_argument("--out", required=True, help="output model.json path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="classify a dataset with a trained model")
    _add_override_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--features-file", help="reuse features from an extract .npz")
    p.add_argument("--out", required=True, help="output predictions CSV")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("grid-search", help="cross-validated hyper-parameter search")
    _add_override_args(p)
    p.add_argument("--features-file", help="reuse features from an extract .npz")
    p.add_argument("--k", type=float)
    p.add_argument("--retention")
    p.add_argument("--out", help="output CV-table CSV")
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("ablation", help="tracking-feature combination table")
    _add_override_args(p)
    p.add_argument("--combos", help="semicolon-separated masks (default: standard five)")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=_cmd_ablation)

    p = sub.add_parser("sweep", help="fusion-weight x retention accuracy grid")
    _add_override_args(p)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="run the configured experiment cells")
    _add_override_args(p)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("show-config", help="print the merged effective config")
    _add_override_args(p)
    p.set_defaults(func=_cmd_show_config)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except GestureLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
