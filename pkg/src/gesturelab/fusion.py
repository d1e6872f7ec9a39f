"""Weighted feature fusion and principal-component reduction.

Fusion concatenates the selected tracking segments with the image
descriptor scaled by a nonnegative weight.  Because the RBF kernel
depends only on squared distances, scaling the image segment by K is
equivalent to an anisotropic kernel with per-segment scales (1, K^2):
the weight controls how much the image features contribute relative to
the geometric ones.

PCA is fit on the already-weighted training matrix; components are kept
until a requested fraction of the total variance is retained (or until
a requested component count, for sensitivity checks).  Features are
deliberately not standardized first: z-scoring would cancel the fusion
weight.
"""

from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .errors import (
    DegenerateData,
    DimensionMismatch,
    LayoutMismatch,
    SchemaVersionMismatch,
)
from .image import HogDescriptor
from .tracking import FeatureMask, TrackingFeatures

# Eigenvalues below RANK_TOL * largest are treated as numerical zeros.
RANK_TOL = 1e-12


@dataclass(frozen=True)
class FusionConfig:
    """Layout of the fused vector: tracking segments then weighted HOG."""

    mask: FeatureMask = field(default_factory=FeatureMask)
    hog_weight: float = 1.0
    hog_dim: int = 0

    def __post_init__(self):
        if self.hog_weight < 0:
            raise ValueError("hog_weight must be >= 0")
        if self.hog_dim < 0:
            raise ValueError("hog_dim must be >= 0")

    @property
    def tracking_dim(self):
        return self.mask.dims()

    @property
    def total_dim(self):
        return self.tracking_dim + self.hog_dim

    def segments(self):
        """(name, offset, length) triples of the fused layout."""
        out = []
        offset = 0
        for name, length in self.mask.segments():
            out.append((name, offset, length))
            offset += length
        out.append(("hog", offset, self.hog_dim))
        return out

    def to_dict(self):
        return {
            "mask": self.mask.label(),
            "hog_weight": float(self.hog_weight),
            "hog_dim": int(self.hog_dim),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            mask=FeatureMask.parse(data["mask"]),
            hog_weight=float(data["hog_weight"]),
            hog_dim=int(data["hog_dim"]),
        )


def _tracking_part(tracking, cfg):
    if isinstance(tracking, TrackingFeatures):
        vec = tracking.vector(cfg.mask)
    else:
        vec = np.asarray(tracking, dtype=float)
    if vec.shape[-1] != cfg.tracking_dim:
        raise LayoutMismatch(
            f"tracking segment has {vec.shape[-1]} dims, layout expects {cfg.tracking_dim}"
        )
    return vec


def _hog_part(hog, cfg):
    if hog is None:
        vec = np.zeros(cfg.hog_dim)
    elif isinstance(hog, HogDescriptor):
        vec = hog.values
    else:
        vec = np.asarray(hog, dtype=float)
    if vec.shape[-1] != cfg.hog_dim:
        raise LayoutMismatch(
            f"hog segment has {vec.shape[-1]} dims, layout expects {cfg.hog_dim}"
        )
    return vec


def fuse(tracking, hog, cfg):
    """Fused vector: [selected tracking segments, hog_weight * HOG]."""
    t = _tracking_part(tracking, cfg)
    h = _hog_part(hog, cfg)
    return np.concatenate([t, cfg.hog_weight * h])


def fuse_matrix(tracking, hog, cfg):
    """Row-wise fusion of a tracking matrix with a HOG matrix."""
    t = np.asarray(tracking, dtype=float)
    h = np.zeros((len(t), cfg.hog_dim)) if hog is None else np.asarray(hog, dtype=float)
    if t.ndim != 2 or h.ndim != 2 or len(t) != len(h):
        raise LayoutMismatch("tracking and hog matrices must have matching rows")
    if t.shape[1] != cfg.tracking_dim or h.shape[1] != cfg.hog_dim:
        raise LayoutMismatch(
            f"matrix segments {t.shape[1]}+{h.shape[1]} do not match layout "
            f"{cfg.tracking_dim}+{cfg.hog_dim}"
        )
    return np.hstack([t, cfg.hog_weight * h])


# ---------------------------------------------------------------------------
# PCA


@dataclass
class PcaModel:
    """Fitted principal components: row-orthonormal, variance-ordered."""

    mean: np.ndarray
    components: np.ndarray  # (k, d)
    variances: np.ndarray  # (k,), non-increasing
    retained_fraction: float

    @property
    def n_components(self):
        return self.components.shape[0]

    @property
    def input_dim(self):
        return self.components.shape[1]

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(
                f"input has {x.shape[-1]} dims, model expects {self.input_dim}"
            )
        return (x - self.mean) @ self.components.T

    def inverse_transform(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.n_components:
            raise DimensionMismatch(
                f"input has {z.shape[-1]} dims, model has {self.n_components} components"
            )
        return z @ self.components + self.mean

    def to_dict(self):
        return {
            "version": 1,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "variances": self.variances.tolist(),
            "retained_fraction": float(self.retained_fraction),
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("version") != 1:
            raise SchemaVersionMismatch(
                f"unsupported PCA model version {data.get('version')!r}"
            )
        return cls(
            mean=np.asarray(data["mean"], dtype=float),
            components=np.asarray(data["components"], dtype=float),
            variances=np.asarray(data["variances"], dtype=float),
            retained_fraction=float(data["retained_fraction"]),
        )

    def save(self, path):
        jsonio.dump_path(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        return cls.from_dict(jsonio.load_path(path))


def fit_pca(data, retained_fraction=None, n_components=None):
    """Fit a PCA model on the rows of `data`.

    Exactly one of `retained_fraction` (select the smallest component
    count whose cumulative variance fraction meets the threshold) or
    `n_components` (fixed count, capped at the rank) must be given.
    Components carry a deterministic sign: the largest-magnitude entry
    of each is positive.  Equal eigenvalues keep the solver's order
    (stable sort by descending eigenvalue).
    """
    if (retained_fraction is None) == (n_components is None):
        raise ValueError("give exactly one of retained_fraction or n_components")
    if retained_fraction is not None and not 0.0 < retained_fraction <= 1.0:
        raise ValueError("retained_fraction must be in (0, 1]")
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("data must be an (n, d) matrix with n >= 2")
    n, d = data.shape

    mean = data.mean(axis=0)
    centered = data - mean
    if d <= n:
        cov = centered.T @ centered / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        components = eigvecs.T
    else:
        # Work on the smaller Gram matrix; it shares the nonzero spectrum.
        gram = centered @ centered.T / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(gram)
        components = np.zeros((len(eigvals), d))
        for i, val in enumerate(eigvals):
            if val > 0:
                vec = centered.T @ eigvecs[:, i]
                norm = np.linalg.norm(vec)
                if norm > 0:
                    components[i] = vec / norm

    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    components = components[order]

    eigvals = np.clip(eigvals, 0.0, None)
    if eigvals[0] <= 0.0:
        raise DegenerateData("data has zero total variance (all rows identical)")
    eigvals[eigvals < eigvals[0] * RANK_TOL] = 0.0
    rank = int(np.count_nonzero(eigvals))

    cumulative = np.cumsum(eigvals)
    total = cumulative[-1]
    if n_components is not None:
        if n_components < 1:
            raise ValueError("n_components must be >= 1")
        k = min(n_components, rank)
        achieved = cumulative[k - 1] / total
    else:
        target = retained_fraction * total
        k = int(np.searchsorted(cumulative, target, side="left")) + 1
        k = min(k, rank)
        achieved = retained_fraction

    components = components[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean,
        components=components,
        variances=eigvals[:k].copy(),
        retained_fraction=float(achieved),
    )


def pca_transform(model, x):
    """Project `x` onto the fitted components (see PcaModel.transform)."""
    return model.transform(x)
