"""Image rectification, binarization, and gradient-histogram descriptors.

Grayscale images are plain 2-D uint8 numpy arrays (row-major, one
channel); files use binary PGM (P5, maxval 255).  The image branch of
the feature pipeline is::

    undistort -> binarize -> crop_to_foreground -> resize -> hog

Raw sensor images suffer barrel distortion; a device-provided
calibration grid maps output pixels to normalized source coordinates
and is applied with bilinear interpolation.  The descriptor is a
histogram of oriented gradients: unsigned orientations over [0, 180)
with linear vote interpolation between adjacent bins, per-cell
histograms, and L2-Hys normalization over sliding blocks.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, MapSizeMismatch, ParseError

MAP_MAGIC = b"LMUM"


# ---------------------------------------------------------------------------
# PGM I/O


def read_pgm(path):
    """Read a binary PGM (P5) file into a 2-D uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise ParseError(f"{path}: truncated PGM header")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ParseError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise ParseError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise ParseError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace after maxval
    pixels = data[pos : pos + width * height]
    if len(pixels) != width * height:
        raise ParseError(f"{path}: truncated PGM pixel data")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(img, path):
    img = _as_image(img)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def _as_image(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("image must be a non-empty 2-D array")
    if img.dtype != np.uint8:
        raise ValueError(f"image must be uint8, got {img.dtype}")
    return img


# ---------------------------------------------------------------------------
# Undistortion


@dataclass
class UndistortionMap:
    """Calibration grid of normalized source coordinates.

    ``samples`` is a (grid_height, grid_width, 2) float array of (u, v)
    pairs in [0, 1]^2; invalid grid points carry the sentinel (-1, -1).
    """

    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 3 or self.samples.shape[2] != 2:
            raise ValueError("samples must have shape (grid_h, grid_w, 2)")
        valid = self.valid_mask()
        vals = self.samples[valid]
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("valid map samples must lie in [0, 1]^2")

    @property
    def grid_width(self):
        return self.samples.shape[1]

    @property
    def grid_height(self):
        return self.samples.shape[0]

    def valid_mask(self):
        return np.all(self.samples >= 0.0, axis=2)

    @classmethod
    def identity(cls, grid_width=8, grid_height=8):
        """Map whose interpolation is the identity transform."""
        us = np.linspace(0.0, 1.0, grid_width)
        vs = np.linspace(0.0, 1.0, grid_height)
        uu, vv = np.meshgrid(us, vs)
        return cls(np.stack([uu, vv], axis=2))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != MAP_MAGIC:
            raise ParseError(f"{path}: bad undistortion map magic")
        gw, gh = struct.unpack_from("<II", data, 4)
        expected = 12 + gw * gh * 8
        if len(data) < expected:
            raise ParseError(f"{path}: truncated undistortion map")
        flat = np.frombuffer(data, dtype="<f4", count=gw * gh * 2, offset=12)
        return cls(flat.astype(float).reshape(gh, gw, 2))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(MAP_MAGIC)
            fh.write(struct.pack("<II", self.grid_width, self.grid_height))
            fh.write(self.samples.astype("<f4").tobytes())


def undistort(raw, umap, out_size):
    """Rectify `raw` through the calibration map at `out_size` = (w, h).

    The grid is bilinearly interpolated at each output pixel to obtain a
    normalized source coordinate, and the source image is bilinearly
    sampled there.  Output pixels whose grid neighborhood contains an
    invalid sample are 0.
    """
    raw = _as_image(raw)
    out_w, out_h = out_size
    if out_w < 1 or out_h < 1:
        raise ValueError("out_size must be at least 1x1")
    gw, gh = umap.grid_width, umap.grid_height
    if gw < 2 or gh < 2:
        raise MapSizeMismatch(
            f"map grid {gw}x{gh} cannot cover a {out_w}x{out_h} output"
        )

    nx = np.arange(out_w) / (out_w - 1) if out_w > 1 else np.zeros(1)
    ny = np.arange(out_h) / (out_h - 1) if out_h > 1 else np.zeros(1)
    gx = nx * (gw - 1)
    gy = ny * (gh - 1)
    gx0 = np.minimum(gx.astype(int), gw - 2)
    gy0 = np.minimum(gy.astype(int), gh - 2)
    fx = (gx - gx0)[np.newaxis, :]
    fy = (gy - gy0)[:, np.newaxis]
    gx0 = gx0[np.newaxis, :]
    gy0 = gy0[:, np.newaxis]

    corners = [
        umap.samples[gy0 + dy, gx0 + dx] for dy in (0, 1) for dx in (0, 1)
    ]
    w00 = (1 - fy) * (1 - fx)
    w01 = (1 - fy) * fx
    w10 = fy * (1 - fx)
    w11 = fy * fx
    uv = (
        corners[0] * w00[..., None]
        + corners[1] * w01[..., None]
        + corners[2] * w10[..., None]
        + corners[3] * w11[..., None]
    )
    invalid = ~np.all([np.all(c >= 0.0, axis=2) for c in corners], axis=0)

    src_h, src_w = raw.shape
    sx = uv[..., 0] * (src_w - 1)
    sy = uv[..., 1] * (src_h - 1)
    out = _sample_bilinear(raw.astype(float), sx, sy)
    out[invalid] = 0.0
    return np.rint(out).astype(np.uint8)


def _sample_bilinear(img_f, xs, ys):
    """Bilinear lookup at float coordinates, clamped to the image."""
    h, w = img_f.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(xs.astype(int), w - 1)
    y0 = np.minimum(ys.astype(int), h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img_f[y0, x0] * (1 - fx) + img_f[y0, x1] * fx
    bot = img_f[y1, x0] * (1 - fx) + img_f[y1, x1] * fx
    return top * (1 - fy) + bot * fy


# ---------------------------------------------------------------------------
# Binarization and framing


def otsu_threshold(img):
    """Threshold maximizing between-class variance of the 256-bin histogram.

    Returns the smallest t such that classifying pixels >= t as
    foreground realizes the optimal split (ties resolved to the lowest
    threshold).
    """
    img = _as_image(img)
    hist = np.bincount(img.ravel(), minlength=256).astype(float)
    total = hist.sum()
    weight0 = np.cumsum(hist)
    mean0 = np.cumsum(hist * np.arange(256))
    mean_total = mean0[-1]
    weight1 = total - weight0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mean_total * weight0 - mean0 * total) ** 2 / (weight0 * weight1)
    between[(weight0 == 0) | (weight1 == 0)] = 0.0
    split = int(np.argmax(between))  # first maximum -> smallest split point
    return split + 1


def binarize(img, threshold=None):
    """Two-valued image: pixels >= threshold become 255, the rest 0.

    With threshold None the Otsu threshold is used.
    """
    img = _as_image(img)
    if threshold is None:
        threshold = otsu_threshold(img)
    return np.where(img >= threshold, 255, 0).astype(np.uint8)


def crop_to_foreground(img, margin=0):
    """Crop to the bounding box of nonzero pixels, padded by `margin`.

    An all-zero image is returned unchanged.
    """
    img = _as_image(img)
    rows = np.flatnonzero(img.any(axis=1))
    cols = np.flatnonzero(img.any(axis=0))
    if rows.size == 0:
        return img
    r0 = max(rows[0] - margin, 0)
    r1 = min(rows[-1] + margin + 1, img.shape[0])
    c0 = max(cols[0] - margin, 0)
    c1 = min(cols[-1] + margin + 1, img.shape[1])
    return img[r0:r1, c0:c1].copy()


def resize_bilinear(img, out_size):
    """Bilinear resize to (w, h) with edge clamping.

    A same-size resize reproduces the input bit-exactly.
    """
    img = _as_image(img)
    out_w, out_h = out_size
    if out_w < 1 or out_h < 1:
        raise ValueError("out_size must be at least 1x1")
    in_h, in_w = img.shape
    if in_w > 1:
        xs = np.arange(out_w) * (in_w - 1) / (out_w - 1) if out_w > 1 else np.full(1, (in_w - 1) / 2)
    else:
        xs = np.zeros(out_w)
    if in_h > 1:
        ys = np.arange(out_h) * (in_h - 1) / (out_h - 1) if out_h > 1 else np.full(1, (in_h - 1) / 2)
    else:
        ys = np.zeros(out_h)
    grid_x, grid_y = np.meshgrid(xs, ys)
    out = _sample_bilinear(img.astype(float), grid_x, grid_y)
    return np.rint(out).astype(np.uint8)


# ---------------------------------------------------------------------------
# Histogram of oriented gradients


@dataclass(frozen=True)
class HogParams:
    """Descriptor geometry: square cells of `cell_size` pixels, square
    blocks of `block_cells` cells sliding with `block_stride` cells,
    `bins` unsigned orientation bins, L2-Hys clipping at `clip`."""

    cell_size: int = 8
    block_cells: int = 2
    block_stride: int = 1
    bins: int = 9
    clip: float = 0.2


@dataclass
class HogDescriptor:
    values: np.ndarray
    cells_x: int
    cells_y: int
    blocks_x: int
    blocks_y: int
    bins: int

    @property
    def geometry(self):
        return (self.cells_x, self.cells_y, self.blocks_x, self.blocks_y, self.bins)


def hog_length(width, height, params=HogParams()):
    """Descriptor length for an image of the given size (closed form)."""
    geo = _hog_geometry(width, height, params)
    _, _, blocks_x, blocks_y = geo
    return blocks_x * blocks_y * params.block_cells**2 * params.bins


def _hog_geometry(width, height, params):
    if width % params.cell_size or height % params.cell_size:
        raise GeometryError(
            f"image {width}x{height} not divisible by cell size {params.cell_size}"
        )
    cells_x = width // params.cell_size
    cells_y = height // params.cell_size
    if cells_x < params.block_cells or cells_y < params.block_cells:
        raise GeometryError(
            f"{cells_x}x{cells_y} cells cannot hold a {params.block_cells}-cell block"
        )
    blocks_x = (cells_x - params.block_cells) // params.block_stride + 1
    blocks_y = (cells_y - params.block_cells) // params.block_stride + 1
    return cells_x, cells_y, blocks_x, blocks_y


def compute_hog(img, params=HogParams()):
    """Histogram-of-oriented-gradients descriptor of a grayscale image.

    Gradients are centered differences with edge replication.  Unsigned
    orientations over [0, 180) vote into the two nearest of `bins`
    equally spaced bins (circular), weighted by gradient magnitude.
    Cell histograms are grouped into sliding blocks and L2-Hys
    normalized, so every output value lies in [0, 1].
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    h, w = img.shape
    cells_x, cells_y, blocks_x, blocks_y = _hog_geometry(w, h, params)

    gx = np.empty_like(img)
    gx[:, 1:-1] = img[:, 2:] - img[:, :-2]
    gx[:, 0] = img[:, 1] - img[:, 0] if w > 1 else 0.0
    gx[:, -1] = img[:, -1] - img[:, -2] if w > 1 else 0.0
    gy = np.empty_like(img)
    gy[1:-1, :] = img[2:, :] - img[:-2, :]
    gy[0, :] = img[1, :] - img[0, :] if h > 1 else 0.0
    gy[-1, :] = img[-1, :] - img[-2, :] if h > 1 else 0.0

    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), np.pi)  # unsigned, [0, pi)

    bin_width = np.pi / params.bins
    position = orientation / bin_width
    lower = np.floor(position).astype(int)
    w_upper = position - lower
    lower %= params.bins
    upper = (lower + 1) % params.bins

    cell_col = np.arange(w) // params.cell_size
    cell_row = np.arange(h) // params.cell_size
    cell_index = cell_row[:, None] * cells_x + cell_col[None, :]
    flat_lower = (cell_index * params.bins + lower).ravel()
    flat_upper = (cell_index * params.bins + upper).ravel()
    n_hist = cells_x * cells_y * params.bins
    hist = np.bincount(flat_lower, weights=(magnitude * (1 - w_upper)).ravel(), minlength=n_hist)
    hist += np.bincount(flat_upper, weights=(magnitude * w_upper).ravel(), minlength=n_hist)
    cells = hist.reshape(cells_y, cells_x, params.bins)

    bc = params.block_cells
    stride = params.block_stride
    out = np.empty(blocks_y * blocks_x * bc * bc * params.bins)
    pos = 0
    block_len = bc * bc * params.bins
    for by in range(blocks_y):
        for bx in range(blocks_x):
            block = cells[by * stride : by * stride + bc, bx * stride : bx * stride + bc].ravel()
            out[pos : pos + block_len] = _l2_hys(block, params.clip)
            pos += block_len
    return HogDescriptor(out, cells_x, cells_y, blocks_x, blocks_y, params.bins)


def _l2_hys(v, clip):
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        return np.zeros_like(v)
    v = v / norm
    np.minimum(v, clip, out=v)
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        return np.zeros_like(v)
    return v / norm


# ---------------------------------------------------------------------------
# Image feature pipeline


@dataclass
class ImagePipelineConfig:
    """End-to-end settings for the image branch of the pipeline.

    `threshold` None selects Otsu binarization.  With `use_both_images`
    the descriptors of both sensor images are concatenated; the default
    uses the first image only.
    """

    undistort_size: tuple = (240, 240)
    threshold: int | None = None
    crop_margin: int = 4
    hog_size: tuple = (64, 64)
    hog: HogParams = field(default_factory=HogParams)
    use_both_images: bool = False

    def descriptor_length(self):
        per_image = hog_length(self.hog_size[0], self.hog_size[1], self.hog)
        return 2 * per_image if self.use_both_images else per_image


def extract_image_features(images, cfg=None, umap=None):
    """HOG feature vector for one sample's sensor image(s).

    Runs undistort (when a map is given), binarize, crop, resize and HOG
    for each selected image and concatenates the descriptors.
    """
    if cfg is None:
        cfg = ImagePipelineConfig()
    selected = images if cfg.use_both_images else images[:1]
    if not len(selected):
        raise ValueError("sample carries no images")
    parts = []
    for img in selected:
        if umap is not None:
            img = undistort(img, umap, cfg.undistort_size)
        img = binarize(img, cfg.threshold)
        img = crop_to_foreground(img, cfg.crop_margin)
        img = resize_bilinear(img, cfg.hog_size)
        parts.append(compute_hog(img, cfg.hog).values)
    return np.concatenate(parts)
