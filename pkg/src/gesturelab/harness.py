"""Experiment harness: the repeated 80/20 protocol with grid search,
feature ablations, and the fusion-weight x PCA-retention sweep.

Every experiment is a pure function of its configuration and master
seed.  Per-repetition seeds derive from the master seed through
SHA-256 of ``"gesturelab:<master>:<tag>"`` (first 8 bytes, little
endian), so repetitions are independent but exactly reproducible.
Reports are written as CSV (one accuracy row per repetition plus an
aggregate, a summed confusion matrix per cell, and per-sample
prediction logs); plotting is left to external tools.
"""

import hashlib
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .data import default_templates, generate_synthetic, load_dataset, split_indices
from .errors import ConfigError, GestureLabError
from .fusion import FusionConfig, fit_pca, fuse_matrix
from .image import ImagePipelineConfig, HogParams, UndistortionMap, extract_image_features
from .svm import (
    KernelParams,
    Preprocessing,
    classify,
    grid_search,
    train_multiclass,
)
from .tracking import FULL_MASK, FeatureMask, extract_tracking_features

THREADS_ENV = "GESTURELAB_THREADS"


def worker_count():
    """Worker cap from the environment; defaults to sequential."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


def derive_seed(master_seed, tag):
    """Published seed derivation: SHA-256 of 'gesturelab:<master>:<tag>'."""
    digest = hashlib.sha256(f"gesturelab:{master_seed}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class SyntheticSpec:
    subjects: int = 13
    reps: int = 20
    seed: int = 2024
    pos_noise_mm: float = 3.0
    rot_noise_deg: float = 10.0
    translation_mm: float = 100.0
    image_size: int = 240


@dataclass
class ExperimentConfig:
    """One experiment: dataset source, feature cells, and protocol knobs.

    `retentions` entries may be None (no PCA), a float in (0, 1]
    (retained-variance fraction) or an int >= 1 (component count).
    """

    manifest: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    features: str = "ang+dist+tip"
    use_hog: bool = True
    k_values: tuple = (1.0,)
    retentions: tuple = (None,)
    image: ImagePipelineConfig = field(default_factory=ImagePipelineConfig)
    undistort_map: str | None = None
    c_grid: tuple = (1.0, 10.0, 100.0, 1000.0)
    gamma_grid: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    folds: int = 10
    repetitions: int = 50
    train_fraction: float = 0.8
    seed: int = 7
    grid_mode: str = "per_cell"  # or "per_repetition"
    svm_tol: float = 1e-3
    svm_max_iter: int = 1_000_000

    def validate(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.k_values or not self.retentions:
            raise ConfigError("k_values and retentions must be non-empty")
        if not self.c_grid or not self.gamma_grid:
            raise ConfigError("c_grid and gamma_grid must be non-empty")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.grid_mode not in ("per_cell", "per_repetition"):
            raise ConfigError(f"unknown grid_mode {self.grid_mode!r}")
        for ret in self.retentions:
            if ret is None:
                continue
            if isinstance(ret, bool) or not isinstance(ret, (int, float)):
                raise ConfigError(f"bad retention value {ret!r}")
            if isinstance(ret, float) and not 0.0 < ret <= 1.0:
                raise ConfigError(f"retention fraction {ret} outside (0, 1]")
            if isinstance(ret, int) and ret < 1:
                raise ConfigError(f"retention component count {ret} must be >= 1")
        try:
            FeatureMask.parse(self.features)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def config_from_dict(data):
    """Build an ExperimentConfig from a plain (JSON) dictionary."""
    data = dict(data)
    kwargs = {}
    if "synthetic" in data:
        kwargs["synthetic"] = _dataclass_from_dict(SyntheticSpec, data.pop("synthetic"))
    if "image" in data:
        image = dict(data.pop("image"))
        if "hog" in image:
            image["hog"] = _dataclass_from_dict(HogParams, image.pop("hog"))
        for key in ("undistort_size", "hog_size"):
            if key in image:
                image[key] = tuple(image[key])
        kwargs["image"] = _dataclass_from_dict(ImagePipelineConfig, image)
    for key in ("k_values", "retentions", "c_grid", "gamma_grid"):
        if key in data:
            kwargs[key] = tuple(data.pop(key))
    known = {f.name for f in fields(ExperimentConfig)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = value
    return ExperimentConfig(**kwargs).validate()


def _dataclass_from_dict(cls, data):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


# ---------------------------------------------------------------------------
# Feature extraction


@dataclass
class FeatureStore:
    """Per-sample features computed once and reused across cells."""

    tracking: np.ndarray  # (n, 25) full tracking segments
    hog: np.ndarray | None  # (n, hog_dim) raw (unweighted) descriptors
    labels: np.ndarray
    sample_ids: list


def build_feature_store(samples, cfg):
    """Extract tracking (and optionally HOG) features for every sample."""
    umap = None
    if cfg.undistort_map is not None:
        umap = UndistortionMap.load(cfg.undistort_map)
    tracking = np.empty((len(samples), FULL_MASK.dims()))
    hog = None
    for i, sample in enumerate(samples):
        tracking[i] = extract_tracking_features(sample.frame).vector(FULL_MASK)
        if cfg.use_hog:
            vec = extract_image_features(sample.images, cfg.image, umap)
            if hog is None:
                hog = np.empty((len(samples), len(vec)))
            hog[i] = vec
    return FeatureStore(
        tracking=tracking,
        hog=hog,
        labels=np.array([s.gesture for s in samples], dtype=int),
        sample_ids=[s.sample_id for s in samples],
    )


def load_samples(cfg):
    """Materialize the configured dataset (manifest or synthetic)."""
    if cfg.manifest is not None:
        return load_dataset(cfg.manifest)
    spec = cfg.synthetic
    return generate_synthetic(
        templates=default_templates(
            pos_noise_mm=spec.pos_noise_mm, rot_noise_deg=spec.rot_noise_deg
        ),
        subjects=spec.subjects,
        reps=spec.reps,
        seed=spec.seed,
        translation_mm=spec.translation_mm,
        image_size=spec.image_size,
    )


# ---------------------------------------------------------------------------
# Cells and results


@dataclass(frozen=True)
class CellSpec:
    """One experiment cell: feature mask, HOG usage, weight, retention."""

    mask: FeatureMask
    use_hog: bool
    k: float | None = None
    retention: object = None

    def label(self):
        base = self.mask.label()
        if self.use_hog:
            return "hog" if base == "none" else base + "+hog"
        return base

    def tag(self):
        return f"{self.label()}_K{_fmt(self.k)}_ret{_fmt(self.retention)}"


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class CellResult:
    cell: CellSpec
    params: KernelParams
    cv_table: list
    classes: list
    accuracies: list
    confusion: np.ndarray  # (m, m) summed over repetitions
    predictions: list  # per rep: list of (sample_id, true, pred, votes_won)
    all_converged: bool

    @property
    def mean_accuracy(self):
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self):
        return float(np.std(self.accuracies))


@dataclass
class Report:
    config: ExperimentConfig
    cells: list

    def all_converged(self):
        return all(c.all_converged for c in self.cells)

    def aggregate_rows(self):
        return [
            (c.cell.label(), c.cell.k, c.cell.retention, c.mean_accuracy, c.std_accuracy)
            for c in self.cells
        ]


def _run_cell(store, cell, cfg):
    labels = store.labels
    cols = cell.mask.column_indices()
    tracking = store.tracking[:, cols]
    hog = store.hog if cell.use_hog else None
    hog_dim = hog.shape[1] if hog is not None else 0
    fusion_cfg = FusionConfig(
        mask=cell.mask,
        hog_weight=float(cell.k) if cell.use_hog else 1.0,
        hog_dim=hog_dim,
    )
    raw = np.hstack([tracking, hog]) if hog is not None else tracking.copy()
    classes = [int(c) for c in np.unique(labels)]
    class_index = {c: k for k, c in enumerate(classes)}
    workers = worker_count()

    def fit_preprocessing(train_idx):
        pca = None
        if cell.retention is not None:
            weighted = fuse_matrix(
                tracking[train_idx],
                hog[train_idx] if hog is not None else None,
                fusion_cfg,
            )
            if isinstance(cell.retention, int) and not isinstance(cell.retention, bool):
                pca = fit_pca(weighted, n_components=cell.retention)
            else:
                pca = fit_pca(weighted, retained_fraction=float(cell.retention))
        return Preprocessing(fusion=fusion_cfg, pca=pca)

    def search(train_idx, tag):
        pre = fit_preprocessing(train_idx)
        projected = pre.apply(raw[train_idx])
        return grid_search(
            projected,
            labels[train_idx],
            cfg.c_grid,
            cfg.gamma_grid,
            folds=cfg.folds,
            seed=derive_seed(cfg.seed, tag),
            tol=cfg.svm_tol,
            workers=workers,
        )

    params = None
    cv_table = []
    if cfg.grid_mode == "per_cell":
        train0, _ = split_indices(
            labels, cfg.train_fraction, derive_seed(cfg.seed, "split:0"), stratified=True
        )
        params, cv_table = search(train0, f"grid:{cell.tag()}")

    accuracies = []
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    predictions = []
    all_converged = True
    for r in range(cfg.repetitions):
        train_idx, test_idx = split_indices(
            labels, cfg.train_fraction, derive_seed(cfg.seed, f"split:{r}"), stratified=True
        )
        if cfg.grid_mode == "per_repetition":
            params, cv_table = search(train_idx, f"grid:{cell.tag()}:{r}")
        pre = fit_preprocessing(train_idx)
        model = train_multiclass(
            pre.apply(raw[train_idx]),
            labels[train_idx],
            params,
            tol=cfg.svm_tol,
            max_iter=cfg.svm_max_iter,
            preprocessing=pre,
            workers=workers,
        )
        all_converged &= model.all_converged()
        predicted, votes_won = classify(model, raw[test_idx])
        truth = labels[test_idx]
        accuracies.append(float(np.mean(predicted == truth)))
        rows = []
        for pos, t in enumerate(test_idx):
            confusion[class_index[int(truth[pos])], class_index[int(predicted[pos])]] += 1
            rows.append(
                (store.sample_ids[t], int(truth[pos]), int(predicted[pos]), int(votes_won[pos]))
            )
        predictions.append(rows)
    return CellResult(
        cell=cell,
        params=params,
        cv_table=cv_table,
        classes=classes,
        accuracies=accuracies,
        confusion=confusion,
        predictions=predictions,
        all_converged=all_converged,
    )


def experiment_cells(cfg):
    """The (fusion weight x retention) cell grid an experiment will run."""
    mask = FeatureMask.parse(cfg.features)
    cells = []
    ks = list(cfg.k_values) if cfg.use_hog else [None]
    for k in ks:
        for retention in cfg.retentions:
            cells.append(CellSpec(mask=mask, use_hog=cfg.use_hog, k=k, retention=retention))
    return cells


def _run_cells(store, cells, cfg):
    results = []
    for cell in cells:
        try:
            results.append(_run_cell(store, cell, cfg))
        except GestureLabError as exc:
            raise type(exc)(f"[cell {cell.tag()}] {exc}") from exc
    return results


def run_experiment(cfg, store=None, samples=None):
    """Run the configured cells over repeated stratified 80/20 splits."""
    cfg.validate()
    if store is None:
        if samples is None:
            samples = load_samples(cfg)
        store = build_feature_store(samples, cfg)
    return Report(config=cfg, cells=_run_cells(store, experiment_cells(cfg), cfg))


def ablation_table(cfg, combos, store=None, samples=None):
    """Tracking-only accuracy per feature combination (no HOG)."""
    cfg.validate()
    if not combos:
        raise ConfigError("combos must be non-empty")
    if store is None:
        if samples is None:
            samples = load_samples(cfg)
        store = build_feature_store(samples, cfg)
    cells = []
    for combo in combos:
        mask = combo if isinstance(combo, FeatureMask) else FeatureMask.parse(combo)
        cells.append(CellSpec(mask=mask, use_hog=False, k=None, retention=None))
    return Report(config=cfg, cells=_run_cells(store, cells, cfg))


def fusion_sweep(cfg, k_values=None, retentions=None, store=None, samples=None):
    """Full fusion-weight x retention accuracy grid on fused features."""
    k_values = tuple(k_values if k_values is not None else cfg.k_values)
    retentions = tuple(retentions if retentions is not None else cfg.retentions)
    if not k_values or not retentions:
        raise ConfigError("sweep grids must be non-empty")
    sweep_cfg = replace(cfg, use_hog=True, k_values=k_values, retentions=retentions)
    return run_experiment(sweep_cfg, store=store, samples=samples)


DEFAULT_ABLATION_COMBOS = (
    "dist+elev+tip",
    "ang+elev+tip",
    "ang+dist+elev",
    "ang+dist+tip",
    "ang+dist+elev+tip",
)


# ---------------------------------------------------------------------------
# Report emission


def write_report_csv(report, path):
    """Long-format accuracies: one row per repetition plus a mean row."""
    lines = ["combo,K,retention,rep,accuracy"]
    for result in report.cells:
        combo = result.cell.label()
        k = _fmt(result.cell.k)
        ret = _fmt(result.cell.retention)
        for r, acc in enumerate(result.accuracies):
            lines.append(f"{combo},{k},{ret},{r},{acc!r}")
        lines.append(f"{combo},{k},{ret},mean,{result.mean_accuracy!r}")
    _write_lines(lines, path)


def write_confusion_csv(classes, matrix, path):
    """Confusion counts with class-label headers and an accuracy line."""
    matrix = np.asarray(matrix)
    lines = ["class," + ",".join(str(c) for c in classes)]
    for i, cls in enumerate(classes):
        lines.append(f"{cls}," + ",".join(str(int(v)) for v in matrix[i]))
    total = int(matrix.sum())
    accuracy = float(np.trace(matrix) / total) if total else 0.0
    lines.append(f"accuracy,{accuracy!r}")
    _write_lines(lines, path)


def emit_confusion(result, path):
    """Write one cell's summed confusion matrix (see write_confusion_csv)."""
    write_confusion_csv(result.classes, result.confusion, path)


def write_predictions_csv(rows, path):
    lines = ["sample_id,true,pred,votes"]
    for sample_id, true, pred, votes in rows:
        lines.append(f"{sample_id},{true},{pred},{votes}")
    _write_lines(lines, path)


def write_cv_table_csv(cv_table, path):
    lines = ["c,gamma,accuracy"]
    for row in cv_table:
        lines.append(f"{row['c']!r},{row['gamma']!r},{row['accuracy']!r}")
    _write_lines(lines, path)


def emit_report(report, out_dir):
    """Write report.csv plus per-cell confusion and prediction logs."""
    os.makedirs(out_dir, exist_ok=True)
    write_report_csv(report, os.path.join(out_dir, "report.csv"))
    for result in report.cells:
        tag = result.cell.tag()
        emit_confusion(result, os.path.join(out_dir, f"confusion_{tag}.csv"))
        for r, rows in enumerate(result.predictions):
            write_predictions_csv(
                rows, os.path.join(out_dir, f"predictions_{tag}_rep{r:03d}.csv")
            )
        if result.cv_table:
            write_cv_table_csv(result.cv_table, os.path.join(out_dir, f"cv_{tag}.csv"))
    return os.path.join(out_dir, "report.csv")


def _write_lines(lines, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
