"""Dataset manifests, the synthetic gesture generator, and splitting.

A dataset is a flat list of samples, each carrying a tracking frame and
one or two grayscale images, keyed by (subject, gesture, repetition).
On disk it is a ``dataset.json`` manifest referencing per-sample frame
JSON files and PGM images by relative path.

Real capture data is not bundled; the synthetic generator stands in for
it.  Each of the ten gesture classes is a template of canonical
fingertip offsets in a hand-local frame with a mask of extended
fingers.  A sample draws a random rigid pose (translation plus a small
rotation), adds Gaussian fingertip noise, emits the posed tracking
frame, and renders a matching binary silhouette (palm disc plus finger
capsules, orthographic projection) so the image and tracking modalities
describe the same hand.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import MissingFile, ParseError, SchemaVersionMismatch
from .geometry import random_rotation
from .image import read_pgm, write_pgm
from .tracking import HandFrame, frame_from_dict, frame_to_dict

NUM_GESTURES = 10
MANIFEST_NAME = "dataset.json"


@dataclass
class Sample:
    subject: int
    gesture: int
    rep: int
    frame: HandFrame
    images: list

    def __post_init__(self):
        if not 0 <= self.gesture < NUM_GESTURES:
            raise ValueError(f"gesture id must be in [0, {NUM_GESTURES}), got {self.gesture}")
        if not 1 <= len(self.images) <= 2:
            raise ValueError("each sample carries 1 or 2 images")

    @property
    def sample_id(self):
        return f"s{self.subject:02d}_g{self.gesture}_r{self.rep:02d}"

    def sort_key(self):
        return (self.subject, self.gesture, self.rep)


# ---------------------------------------------------------------------------
# Gesture templates and synthesis


@dataclass
class GestureTemplate:
    """Canonical pose of one gesture class in the hand-local frame.

    The local frame has the palm at the origin, fingers along +y and
    the palm normal along +z.  `offsets` holds all five canonical
    fingertip positions (thumb..pinky order); only fingers flagged in
    `extended` are detected and rendered.  The middle finger (index 2)
    must always be extended because it defines the hand scale.
    """

    gesture_id: int
    offsets: np.ndarray  # (5, 3) mm
    extended: np.ndarray  # (5,) bool
    pos_noise_mm: float = 3.0
    rot_noise_rad: float = math.radians(10.0)

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(5, 3)
        self.extended = np.asarray(self.extended, dtype=bool).reshape(5)
        if not self.extended[2]:
            raise ValueError("the middle finger must be extended (defines the scale)")
        norms = np.linalg.norm(self.offsets[self.extended], axis=1)
        if norms.min() < 20.0 or norms.max() > 120.0:
            raise ValueError("extended fingertip offsets must lie 20-120 mm from the palm")


def _finger_layout(spread=1.0):
    """Five canonical fingertip offsets: fan of angles around +y."""
    angles_deg = np.array([55.0, 22.0, 0.0, -18.0, -38.0]) * spread
    lengths = np.array([65.0, 85.0, 95.0, 88.0, 70.0])
    offs = np.zeros((5, 3))
    for k in range(5):
        a = math.radians(angles_deg[k])
        offs[k] = (lengths[k] * math.sin(a), lengths[k] * math.cos(a), 0.0)
    return offs


def default_templates(pos_noise_mm=3.0, rot_noise_deg=10.0):
    """Ten distinguishable gesture classes over extended-finger subsets."""
    masks = [
        [0, 0, 1, 0, 0],
        [0, 1, 1, 0, 0],
        [0, 1, 1, 1, 0],
        [0, 1, 1, 1, 1],
        [1, 1, 1, 1, 1],
        [1, 0, 1, 0, 0],
        [1, 1, 1, 0, 0],
        [0, 0, 1, 0, 1],
        [1, 0, 1, 0, 1],
        [1, 1, 1, 1, 0],
    ]
    rot = math.radians(rot_noise_deg)
    templates = []
    for gid, mask in enumerate(masks):
        spread = 1.0 + 0.06 * ((gid % 3) - 1)  # mild per-class spread variation
        offs = _finger_layout(spread)
        if gid in (7, 8):  # raise the pinky side out of the palm plane
            offs[4, 2] = 25.0
        if gid in (5, 8):
            offs[0, 2] = -20.0  # thumb dips below the palm plane
        templates.append(
            GestureTemplate(
                gesture_id=gid,
                offsets=offs,
                extended=np.array(mask, dtype=bool),
                pos_noise_mm=pos_noise_mm,
                rot_noise_rad=rot,
            )
        )
    return templates


def render_silhouette(palm_center, fingertips, palm_radius_mm, finger_radius_mm,
                      size=240, window_mm=250.0):
    """Binary hand silhouette: orthographic projection onto the x-y plane.

    World coordinates in [-window, window] mm map onto a size x size
    canvas; the palm is a filled disc and each fingertip a capsule from
    the palm center.
    """
    scale = size / (2.0 * window_mm)

    def to_px(p):
        return np.array([(p[0] + window_mm) * scale, (p[1] + window_mm) * scale])

    ys, xs = np.mgrid[0:size, 0:size]
    xs = xs + 0.5
    ys = ys + 0.5
    mask = np.zeros((size, size), dtype=bool)

    c = to_px(palm_center)
    r = palm_radius_mm * scale
    mask |= (xs - c[0]) ** 2 + (ys - c[1]) ** 2 <= r * r

    fr = finger_radius_mm * scale
    for tip in fingertips:
        t = to_px(tip)
        seg = t - c
        seg_len2 = float(seg @ seg)
        if seg_len2 < 1e-12:
            continue
        u = np.clip(((xs - c[0]) * seg[0] + (ys - c[1]) * seg[1]) / seg_len2, 0.0, 1.0)
        dx = xs - (c[0] + u * seg[0])
        dy = ys - (c[1] + u * seg[1])
        mask |= dx * dx + dy * dy <= fr * fr
    return np.where(mask, 255, 0).astype(np.uint8)


def generate_synthetic(
    templates=None,
    subjects=13,
    reps=20,
    seed=0,
    translation_mm=100.0,
    image_size=240,
    subject_scale_range=(0.9, 1.1),
):
    """Deterministic synthetic dataset of subjects x gestures x reps samples.

    Samples are generated in (subject, gesture, repetition) order from a
    single seeded stream with a fixed number of draws per sample, so a
    given seed always yields bit-identical data.
    """
    if templates is None:
        templates = default_templates()
    if subjects < 1 or reps < 1:
        raise ValueError("subjects and reps must be >= 1")
    rng = np.random.default_rng(seed)
    samples = []
    for s in range(subjects):
        hand_scale = rng.uniform(*subject_scale_range)
        for tpl in templates:
            middle_len = hand_scale * float(np.linalg.norm(tpl.offsets[2]))
            palm_radius = 0.40 * middle_len
            finger_radius = 0.10 * middle_len
            for r in range(reps):
                translation = rng.uniform(-translation_mm, translation_mm, size=3)
                rot = random_rotation(rng, tpl.rot_noise_rad)
                noise = rng.normal(0.0, tpl.pos_noise_mm or 0.0, size=(5, 3))
                local = tpl.offsets * hand_scale + noise
                world = translation + (rot @ local[tpl.extended].T).T
                middle_pos = int(np.sum(tpl.extended[:2]))  # rank of finger 2 among extended
                frame = HandFrame(
                    palm_center=translation,
                    palm_normal=rot @ np.array([0.0, 0.0, 1.0]),
                    hand_direction=rot @ np.array([0.0, 1.0, 0.0]),
                    fingertips=world,
                    middle_index=middle_pos,
                )
                img = render_silhouette(
                    translation, world, palm_radius, finger_radius, size=image_size
                )
                samples.append(
                    Sample(subject=s, gesture=tpl.gesture_id, rep=r, frame=frame, images=[img])
                )
    return samples


# ---------------------------------------------------------------------------
# Manifest I/O


def save_dataset(samples, out_dir):
    """Write frames, images and a dataset.json manifest under out_dir."""
    frames_dir = os.path.join(out_dir, "frames")
    images_dir = os.path.join(out_dir, "images")
    os.makedirs(frames_dir, exist_ok=True)
    os.makedirs(images_dir, exist_ok=True)
    records = []
    for sample in sorted(samples, key=Sample.sort_key):
        sid = sample.sample_id
        frame_rel = f"frames/{sid}.json"
        jsonio.dump_path(frame_to_dict(sample.frame), os.path.join(out_dir, frame_rel))
        image_rels = []
        for k, img in enumerate(sample.images):
            rel = f"images/{sid}_{k}.pgm"
            write_pgm(img, os.path.join(out_dir, rel))
            image_rels.append(rel)
        records.append(
            {
                "subject": sample.subject,
                "gesture": sample.gesture,
                "rep": sample.rep,
                "frame": frame_rel,
                "images": image_rels,
            }
        )
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    jsonio.dump_path({"version": 1, "samples": records}, manifest_path)
    return manifest_path


def load_dataset(manifest_path):
    """Load every sample referenced by a manifest.

    Any missing referenced file is a hard error naming every missing
    path.  Samples come back sorted by (subject, gesture, repetition).
    """
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, MANIFEST_NAME)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise MissingFile(f"manifest not found: {manifest_path}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: {exc}") from exc
    if not isinstance(manifest, dict) or "samples" not in manifest:
        raise ParseError(f"{manifest_path}: not a dataset manifest")
    if manifest.get("version") != 1:
        raise SchemaVersionMismatch(
            f"unsupported manifest version {manifest.get('version')!r}"
        )

    base = os.path.dirname(os.path.abspath(manifest_path))
    missing = []
    for rec in manifest["samples"]:
        for rel in [rec.get("frame")] + list(rec.get("images", [])):
            if rel is None or not os.path.isfile(os.path.join(base, rel)):
                missing.append(str(rel))
    if missing:
        raise MissingFile("missing dataset files: " + ", ".join(missing))

    samples = []
    for rec in manifest["samples"]:
        try:
            subject = int(rec["subject"])
            gesture = int(rec["gesture"])
            rep = int(rec["rep"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{manifest_path}: bad sample record: {exc}") from exc
        with open(os.path.join(base, rec["frame"]), "r", encoding="utf-8") as fh:
            try:
                frame = frame_from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{rec['frame']}: {exc}") from exc
        images = [read_pgm(os.path.join(base, rel)) for rel in rec["images"]]
        samples.append(Sample(subject=subject, gesture=gesture, rep=rep, frame=frame, images=images))
    samples.sort(key=Sample.sort_key)
    return samples


def dataset_summary(samples):
    """Sample counts keyed by (subject, gesture)."""
    counts = {}
    for s in samples:
        key = (s.subject, s.gesture)
        counts[key] = counts.get(key, 0) + 1
    return counts


def build_manifest(root_dir, out_path=None):
    """Build a manifest from a conventional directory tree.

    Expects ``frames/<id>.json`` and ``images/<id>_<k>.pgm`` with ids of
    the form ``s<subject>_g<gesture>_r<rep>`` (the save_dataset layout).
    Useful for converting externally captured data into a loadable
    dataset; no external data ships with the package.
    """
    frames_dir = os.path.join(root_dir, "frames")
    if not os.path.isdir(frames_dir):
        raise MissingFile(f"no frames/ directory under {root_dir}")
    records = []
    for name in sorted(os.listdir(frames_dir)):
        if not name.endswith(".json"):
            continue
        sid = name[: -len(".json")]
        try:
            parts = sid.split("_")
            subject = int(parts[0][1:])
            gesture = int(parts[1][1:])
            rep = int(parts[2][1:])
        except (IndexError, ValueError) as exc:
            raise ParseError(f"cannot parse sample id from {name!r}") from exc
        images = sorted(
            f"images/{f}"
            for f in os.listdir(os.path.join(root_dir, "images"))
            if f.startswith(sid + "_") and f.endswith(".pgm")
        )
        records.append(
            {
                "subject": subject,
                "gesture": gesture,
                "rep": rep,
                "frame": f"frames/{name}",
                "images": images,
            }
        )
    out_path = out_path or os.path.join(root_dir, MANIFEST_NAME)
    jsonio.dump_path({"version": 1, "samples": records}, out_path)
    return out_path


# ---------------------------------------------------------------------------
# Splitting


def split_indices(labels, train_fraction, seed, stratified=True):
    """Seeded train/test index split; per-stratum floor allocation.

    With stratification each gesture class is shuffled separately and
    the first floor(fraction * n) samples go to train.  Returned index
    arrays are sorted ascending.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train = []
    if stratified:
        for cls in np.unique(labels):
            rows = np.flatnonzero(labels == cls)
            rows = rows[rng.permutation(len(rows))]
            n_train = int(math.floor(train_fraction * len(rows)))
            train.extend(rows[:n_train].tolist())
    else:
        order = rng.permutation(len(labels))
        n_train = int(math.floor(train_fraction * len(labels)))
        train.extend(order[:n_train].tolist())
    train_idx = np.array(sorted(train), dtype=int)
    test_mask = np.ones(len(labels), dtype=bool)
    test_mask[train_idx] = False
    return train_idx, np.flatnonzero(test_mask)


def split(samples, train_fraction, seed, stratified=True):
    """Split a sample list into (train, test) lists."""
    labels = [s.gesture for s in samples]
    train_idx, test_idx = split_indices(labels, train_fraction, seed, stratified)
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]
