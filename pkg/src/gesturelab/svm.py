"""Soft-margin RBF support-vector machines trained with an SMO solver.

Binary models solve the standard dual

    minimize    0.5 a' Q a - sum(a)      with Q_ij = y_i y_j K(x_i, x_j)
    subject to  y' a = 0,  0 <= a_i <= C

by sequential minimal optimization with maximal-violating-pair working
set selection.  The multi-class wrapper trains one binary model per
unordered class pair and predicts by majority vote; ties are broken by
the largest sum of absolute decision values over the pairs involving
each tied class, then by class order.  Hyper-parameters are selected by
grid search with stratified k-fold cross-validation.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import (
    DimensionMismatch,
    InsufficientData,
    SchemaVersionMismatch,
    SingleClassData,
)
from .fusion import FusionConfig, PcaModel

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 1_000_000
SV_EPS = 1e-8
FULL_KERNEL_LIMIT = 4096


@dataclass(frozen=True)
class KernelParams:
    """RBF-SVM hyper-parameters: soft-margin penalty and kernel width."""

    c: float
    gamma: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")


def rbf_kernel(x, y, gamma):
    """exp(-gamma * ||x - y||^2) for a single pair of vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"vector shapes differ: {x.shape} vs {y.shape}")
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_kernel_matrix(X, Y, gamma):
    """Kernel matrix between the rows of X and Y."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"row dims differ: {X.shape[1]} vs {Y.shape[1]}")
    sq = (
        (X * X).sum(axis=1)[:, None]
        + (Y * Y).sum(axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-gamma * sq)


class KernelCache:
    """Row-on-demand RBF kernel of a fixed training matrix.

    Small problems precompute the full matrix; larger ones keep an LRU
    of rows.  Both modes obtain rows from the same computation, so
    results are bit-identical with and without the full cache.
    """

    def __init__(self, X, gamma, full_limit=FULL_KERNEL_LIMIT, lru_rows=512):
        self.X = np.asarray(X, dtype=float)
        self.gamma = gamma
        self.n = len(self.X)
        self._sq = (self.X * self.X).sum(axis=1)
        self._full = None
        self._lru = None
        self._lru_rows = lru_rows
        if self.n <= full_limit:
            self._full = np.empty((self.n, self.n))
            for i in range(self.n):
                self._full[i] = self._compute_row(i)
        else:
            self._lru = {}

    def _compute_row(self, i):
        sq = self._sq + self._sq[i] - 2.0 * (self.X @ self.X[i])
        np.clip(sq, 0.0, None, out=sq)
        row = np.exp(-self.gamma * sq)
        row[i] = 1.0
        return row

    def row(self, i):
        if self._full is not None:
            return self._full[i]
        row = self._lru.pop(i, None)
        if row is None:
            row = self._compute_row(i)
            if len(self._lru) >= self._lru_rows:
                self._lru.pop(next(iter(self._lru)))
        self._lru[i] = row  # reinsert as most recent
        return row


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    converged: bool
    iterations: int


def smo_solve(kernel, y, c, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve the SVM dual for labels y in {-1, +1}.

    `kernel` is a KernelCache (or any object with .row(i)).  Iterates
    two-variable updates on the maximal-violating pair until the KKT
    violation gap drops below `tol` or the iteration budget is spent.
    Returns multipliers, the bias (averaged over free support vectors,
    or the midpoint of the feasible interval if none are free), a
    convergence flag, and the update count.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective at alpha = 0
    pos = y > 0

    converged = False
    iterations = 0
    while iterations < max_iter:
        v = -y * grad
        up = (pos & (alpha < c)) | (~pos & (alpha > 0.0))
        low = (pos & (alpha > 0.0)) | (~pos & (alpha < c))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        if v[i] - v[j] <= tol:
            converged = True
            break

        row_i = kernel.row(i)
        row_j = kernel.row(j)
        curvature = max(row_i[i] + row_j[j] - 2.0 * row_i[j], 1e-12)
        step = (v[i] - v[j]) / curvature
        cap_i = (c - alpha[i]) if pos[i] else alpha[i]
        cap_j = alpha[j] if pos[j] else (c - alpha[j])
        step = min(step, cap_i, cap_j)

        alpha[i] = min(max(alpha[i] + y[i] * step, 0.0), c)
        alpha[j] = min(max(alpha[j] - y[j] * step, 0.0), c)
        grad += step * y * (row_i - row_j)
        iterations += 1

    # Dual feasibility must hold regardless of convergence.
    if alpha.min() < 0.0 or alpha.max() > c + 1e-8 or abs(np.dot(alpha, y)) > 1e-8:
        raise RuntimeError("SMO produced an infeasible dual solution")

    v = -y * grad
    free = (alpha > 0.0) & (alpha < c)
    if free.any():
        bias = float(np.mean(v[free]))
    else:
        up = (pos & (alpha < c)) | (~pos & (alpha > 0.0))
        low = (pos & (alpha > 0.0)) | (~pos & (alpha < c))
        hi = v[up].max() if up.any() else 0.0
        lo = v[low].min() if low.any() else 0.0
        bias = float(0.5 * (hi + lo))
    return SmoResult(alpha=alpha, bias=bias, converged=converged, iterations=iterations)


@dataclass
class BinarySvmModel:
    """Trained binary classifier: decision(x) = sum_i coef_i k(sv_i, x) + bias."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray  # alpha_i * y_i for support vectors
    bias: float
    params: KernelParams
    converged: bool = True


def train_binary(X, y, params, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Train a binary RBF SVM on rows of X with labels y in {-1, +1}."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one label per row")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassData("binary training needs both labels present")
    y = np.where(y > 0, 1.0, -1.0)

    cache = KernelCache(X, params.gamma)
    result = smo_solve(cache, y, params.c, tol=tol, max_iter=max_iter)

    sv = result.alpha > SV_EPS
    if not sv.any():
        sv = result.alpha > 0.0
    if not sv.any():
        sv[int(np.argmax(result.alpha))] = True
    return BinarySvmModel(
        support_vectors=X[sv].copy(),
        dual_coefs=(result.alpha * y)[sv].copy(),
        bias=result.bias,
        params=params,
        converged=result.converged,
    )


def decision_values(model, X):
    """Decision function of a binary model on one or many vectors."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.support_vectors.shape[1]:
        raise DimensionMismatch(
            f"input has {X.shape[1]} dims, model expects {model.support_vectors.shape[1]}"
        )
    k = rbf_kernel_matrix(X, model.support_vectors, model.params.gamma)
    vals = k @ model.dual_coefs + model.bias
    return float(vals[0]) if single else vals


def decision_value(model, x):
    return decision_values(model, x)


# ---------------------------------------------------------------------------
# One-vs-one multi-class wrapper


@dataclass
class Preprocessing:
    """Feature preprocessing baked into a trained multi-class model.

    Input vectors are the unweighted concatenation [tracking segments,
    raw HOG]; apply() scales the HOG segment by the fusion weight and
    projects through PCA when fitted.
    """

    fusion: FusionConfig
    pca: PcaModel | None = None

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.fusion.total_dim:
            raise DimensionMismatch(
                f"input has {X.shape[-1]} dims, preprocessing expects {self.fusion.total_dim}"
            )
        td = self.fusion.tracking_dim
        out = np.concatenate(
            [X[..., :td], self.fusion.hog_weight * X[..., td:]], axis=-1
        )
        if self.pca is not None:
            out = self.pca.transform(out)
        return out


@dataclass
class MulticlassSvm:
    """One-vs-one ensemble over an ordered class list.

    `models` maps each (class_i, class_j) pair with i < j in class order
    to a binary model whose positive side is class_i.
    """

    classes: list
    models: dict
    preprocessing: Preprocessing | None = None

    @property
    def n_pairs(self):
        return len(self.models)

    def all_converged(self):
        return all(m.converged for m in self.models.values())


def class_pairs(classes):
    return [
        (classes[i], classes[j])
        for i in range(len(classes))
        for j in range(i + 1, len(classes))
    ]


def train_multiclass(
    X,
    labels,
    params,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    preprocessing=None,
    workers=1,
):
    """Train one binary model per unordered class pair.

    Pair trainings are independent and may run on a small thread pool;
    the assembled model is identical for any worker count.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    classes = [c.item() if hasattr(c, "item") else c for c in np.unique(labels)]
    pairs = class_pairs(classes)

    def _train_pair(pair):
        ci, cj = pair
        rows = np.flatnonzero((labels == ci) | (labels == cj))
        y = np.where(labels[rows] == ci, 1.0, -1.0)
        try:
            return train_binary(X[rows], y, params, tol=tol, max_iter=max_iter)
        except SingleClassData as exc:
            raise SingleClassData(f"class pair ({ci}, {cj}): {exc}") from exc

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            trained = list(pool.map(_train_pair, pairs))
    else:
        trained = [_train_pair(pair) for pair in pairs]
    return MulticlassSvm(
        classes=classes,
        models=dict(zip(pairs, trained)),
        preprocessing=preprocessing,
    )


def vote_table(model, X):
    """Votes and absolute-margin sums per class for rows of X.

    Returns (votes, margins): integer (n, m) vote counts summing to
    m(m-1)/2 per row, and float (n, m) sums of |decision value| over the
    pairs involving each class.
    """
    X = np.asarray(X, dtype=float)
    X = np.atleast_2d(X)
    if model.preprocessing is not None:
        X = model.preprocessing.apply(X)
    index = {c: k for k, c in enumerate(model.classes)}
    votes = np.zeros((len(X), len(model.classes)), dtype=int)
    margins = np.zeros((len(X), len(model.classes)))
    for (ci, cj), binary in model.models.items():
        vals = decision_values(binary, X)
        first = vals >= 0.0  # decision 0 goes to the pair's first class
        ki, kj = index[ci], index[cj]
        votes[:, ki] += first
        votes[:, kj] += ~first
        margins[:, ki] += np.abs(vals)
        margins[:, kj] += np.abs(vals)
    return votes, margins


def predict(model, X):
    """Predicted class label(s) by majority vote over all pairs."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    votes, margins = vote_table(model, X)
    winners = _vote_winners(votes, margins)
    labels = [model.classes[k] for k in winners]
    return labels[0] if single else np.asarray(labels)


def _vote_winners(votes, margins):
    winners = np.empty(len(votes), dtype=int)
    for r in range(len(votes)):
        best = int(np.max(votes[r]))
        tied = np.flatnonzero(votes[r] == best)
        if len(tied) == 1:
            winners[r] = tied[0]
        else:
            winners[r] = tied[int(np.argmax(margins[r][tied]))]
    return winners


def classify(model, X):
    """Predicted labels plus the winner's vote count for rows of X."""
    votes, margins = vote_table(model, X)
    winners = _vote_winners(votes, margins)
    labels = np.asarray([model.classes[k] for k in winners])
    return labels, votes[np.arange(len(votes)), winners]


# ---------------------------------------------------------------------------
# Grid search


def stratified_folds(labels, folds, seed):
    """Fold index per sample: seeded shuffle within each class, then
    round-robin assignment so every fold sees every class."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=int)
    for cls in np.unique(labels):
        rows = np.flatnonzero(labels == cls)
        rows = rows[rng.permutation(len(rows))]
        assignment[rows] = np.arange(len(rows)) % folds
    return assignment


def grid_search(X, labels, c_grid, gamma_grid, folds=10, seed=0, tol=DEFAULT_TOL, workers=1):
    """Pick (C, gamma) by stratified k-fold cross-validated accuracy.

    Ties go to the smaller C, then the smaller gamma.  Classes with
    fewer samples than `folds` degrade the fold count to the smallest
    class size (leave-one-out per class) with a warning; classes with
    fewer than 2 samples are an error.  Returns the winning params and
    the full CV table.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if len(c_grid) == 0 or len(gamma_grid) == 0:
        raise ValueError("parameter grids must be non-empty")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if len(labels) == 0:
        raise InsufficientData("training set is empty")
    _, counts = np.unique(labels, return_counts=True)
    min_count = int(counts.min())
    if min_count < 2:
        raise InsufficientData(
            f"smallest class has {min_count} sample(s); need at least 2 for CV"
        )
    if min_count < folds:
        warnings.warn(
            f"reducing folds from {folds} to {min_count} (smallest class size)",
            stacklevel=2,
        )
        folds = min_count

    fold_of = stratified_folds(labels, folds, seed)
    best = None
    table = []
    for c in sorted(c_grid):
        for gamma in sorted(gamma_grid):
            params = KernelParams(c=c, gamma=gamma)
            correct = 0
            fold_accuracies = []
            for f in range(folds):
                train = fold_of != f
                held = ~train
                model = train_multiclass(
                    X[train], labels[train], params, tol=tol, workers=workers
                )
                pred = predict(model, X[held])
                hits = int(np.sum(pred == labels[held]))
                correct += hits
                fold_accuracies.append(hits / int(held.sum()))
            accuracy = correct / len(labels)
            table.append(
                {
                    "c": c,
                    "gamma": gamma,
                    "accuracy": accuracy,
                    "fold_accuracies": fold_accuracies,
                }
            )
            if best is None or accuracy > best[0]:
                best = (accuracy, params)
    return best[1], table


# ---------------------------------------------------------------------------
# Serialization


def model_to_dict(model):
    pairs = []
    for (ci, cj), binary in model.models.items():
        pairs.append(
            {
                "first": ci,
                "second": cj,
                "support_vectors": binary.support_vectors.tolist(),
                "dual_coefs": binary.dual_coefs.tolist(),
                "bias": float(binary.bias),
                "c": float(binary.params.c),
                "gamma": float(binary.params.gamma),
                "converged": bool(binary.converged),
            }
        )
    pre = None
    if model.preprocessing is not None:
        pre = {
            "fusion": model.preprocessing.fusion.to_dict(),
            "pca": None
            if model.preprocessing.pca is None
            else model.preprocessing.pca.to_dict(),
        }
    return {
        "version": 1,
        "kind": "gesturelab-multiclass-svm",
        "classes": list(model.classes),
        "pairs": pairs,
        "preprocessing": pre,
    }


def model_from_dict(data):
    if data.get("version") != 1:
        raise SchemaVersionMismatch(f"unsupported model version {data.get('version')!r}")
    models = {}
    for rec in data["pairs"]:
        pair = (rec["first"], rec["second"])
        models[pair] = BinarySvmModel(
            support_vectors=np.asarray(rec["support_vectors"], dtype=float),
            dual_coefs=np.asarray(rec["dual_coefs"], dtype=float),
            bias=float(rec["bias"]),
            params=KernelParams(c=float(rec["c"]), gamma=float(rec["gamma"])),
            converged=bool(rec["converged"]),
        )
    pre = None
    if data.get("preprocessing") is not None:
        raw = data["preprocessing"]
        pre = Preprocessing(
            fusion=FusionConfig.from_dict(raw["fusion"]),
            pca=None if raw.get("pca") is None else PcaModel.from_dict(raw["pca"]),
        )
    return MulticlassSvm(classes=list(data["classes"]), models=models, preprocessing=pre)


def save_model(model, path):
    jsonio.dump_path(model_to_dict(model), path)


def load_model(path):
    return model_from_dict(jsonio.load_path(path))
