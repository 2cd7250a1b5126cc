"""Synthetic scene generation, annotation records, and dataset directory I/O.

A dataset directory holds ``images/`` (8-bit PGM files), ``full.jsonl`` with
every image's located transcriptions, ``weak.jsonl`` with the keyword-only
view of the same scenes, and ``manifest.txt`` echoing the generating spec.
Everything is reproducible byte-for-byte from the manifest: image i is drawn
from a generator seeded with (seed, i) and its weak record from (seed, i, 1).
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import font5x7, geom
from .geom import Quadrangle


class ParseError(ValueError):
    """Malformed annotation line; carries the 1-based line number."""

    def __init__(self, path, line_no, why):
        super().__init__(f"{path}:{line_no}: {why}")
        self.line_no = line_no


class SchemaError(ValueError):
    """Structurally valid JSON missing a required field."""

    def __init__(self, path, line_no, fieldname):
        super().__init__(f"{path}:{line_no}: missing field {fieldname!r}")
        self.fieldname = fieldname


class SpecTooCrowded(RuntimeError):
    """Requested line count cannot be placed without overlap."""


class TooFewSamples(ValueError):
    """Not enough annotations to populate every split."""


@dataclass
class Region:
    """One labeled text instance: vertex list, transcription, orientation."""

    points: np.ndarray
    text: str
    vertical: bool = False

    def quad(self) -> Quadrangle:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 4:
            return Quadrangle(pts)
        # many-point polygon labels collapse to their best-fit quadrangle
        return geom.enclosing_quadrangle(pts)


@dataclass
class FullAnnotation:
    image: str
    regions: list = field(default_factory=list)


@dataclass
class WeakAnnotation:
    image: str
    keywords: list = field(default_factory=list)


@dataclass
class SceneSpec:
    """Generator knobs; the seed pins the entire dataset."""

    image_size: int = 64
    lines_min: int = 1
    lines_max: int = 2
    vertical_fraction: float = 1.0 / 7.0  # 6:1 horizontal:vertical target
    alphabet: str = font5x7.ALPHABET
    jitter: float = 1.2
    noise: float = 0.05
    word_len_min: int = 2
    word_len_max: int = 4
    glyph_scales: tuple = (1, 2)
    seed: int = 0

    def validate(self):
        if self.image_size < 16 or self.image_size % 4:
            raise ValueError("image_size must be >= 16 and a multiple of 4")
        if not (1 <= self.lines_min <= self.lines_max):
            raise ValueError("bad line count range")
        if not (1 <= self.word_len_min <= self.word_len_max):
            raise ValueError("bad word length range")
        if not self.alphabet:
            raise ValueError("empty alphabet")
        if not (0.0 <= self.vertical_fraction < 1.0):
            raise ValueError("vertical_fraction must be in [0, 1)")
        return self


def _place_line(spec: SceneSpec, rng, existing):
    size = spec.image_size
    for _ in range(60):
        vertical = bool(rng.random() < spec.vertical_fraction)
        length = int(rng.integers(spec.word_len_min, spec.word_len_max + 1))
        text = "".join(spec.alphabet[rng.integers(len(spec.alphabet))]
                       for _ in range(length))
        scale = int(spec.glyph_scales[rng.integers(len(spec.glyph_scales))])
        bitmap = font5x7.render_text_bitmap(text, scale=scale, vertical=vertical)
        h0, w0 = bitmap.shape
        pad = spec.jitter + 2.0
        if w0 + 2 * pad >= size or h0 + 2 * pad >= size:
            continue
        x0 = rng.uniform(pad, size - w0 - pad)
        y0 = rng.uniform(pad, size - h0 - pad)
        base = np.array([[x0, y0], [x0 + w0, y0], [x0 + w0, y0 + h0], [x0, y0 + h0]])
        quad = Quadrangle(base + rng.uniform(-spec.jitter, spec.jitter, size=(4, 2)))
        if quad.area < 0.5 * w0 * h0:
            continue
        inflated = quad.shrunk(1.25)
        if any(geom.iou(inflated, q.shrunk(1.25)) > 0.0 for q, _, _, _ in existing):
            continue
        return quad, text, vertical, (bitmap, base)
    raise SpecTooCrowded(
        f"could not place line {len(existing) + 1} on a {size}x{size} canvas")


def render_scene(spec: SceneSpec, rng) -> tuple[np.ndarray, FullAnnotation]:
    """Draw one scene: noisy background plus perspective-warped text lines.

    Returns the grayscale image in [0, 1] and its full annotation; the
    annotation quads are exactly the warped line boxes.
    """
    spec.validate()
    size = spec.image_size
    n_lines = int(rng.integers(spec.lines_min, spec.lines_max + 1))
    placed = []
    for _ in range(n_lines):
        quad, text, vertical, aux = _place_line(spec, rng, placed)
        placed.append((quad, text, vertical, aux))

    base_level = rng.uniform(0.08, 0.22)
    image = base_level + rng.normal(0.0, spec.noise, size=(size, size))
    regions = []
    for quad, text, vertical, (bitmap, base) in placed:
        h0, w0 = bitmap.shape
        rect = [[0, 0], [w0, 0], [w0, h0], [0, h0]]
        to_bitmap = geom.solve_homography(quad.pts, rect)
        fg = rng.uniform(0.75, 1.0)
        lo = np.maximum(np.floor(quad.pts.min(axis=0)).astype(int) - 1, 0)
        hi = np.minimum(np.ceil(quad.pts.max(axis=0)).astype(int) + 1, size)
        ys, xs = np.mgrid[lo[1]:hi[1], lo[0]:hi[0]]
        centers = np.stack([xs + 0.5, ys + 0.5], axis=-1).reshape(-1, 2)
        bcoords = to_bitmap.apply(centers)
        alpha = _sample_bitmap(bitmap, bcoords).reshape(xs.shape)
        patch = image[lo[1]:hi[1], lo[0]:hi[0]]
        image[lo[1]:hi[1], lo[0]:hi[0]] = patch * (1.0 - alpha) + fg * alpha
        regions.append(Region(points=quad.canonical().pts.copy(), text=text,
                              vertical=vertical))
    return np.clip(image, 0.0, 1.0), FullAnnotation(image="", regions=regions)


def _sample_bitmap(bitmap, coords):
    h, w = bitmap.shape
    x = coords[:, 0] - 0.5
    y = coords[:, 1] - 0.5
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    fx = x - x0
    fy = y - y0
    out = np.zeros(len(coords))
    for dy, dx, wgt in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                        (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        yy = y0 + dy
        xx = x0 + dx
        valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        out += bitmap[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)] * wgt * valid
    return out


def weaken(full: FullAnnotation, rng) -> WeakAnnotation:
    """Drop all location data, keeping 1..k of the region texts as keywords."""
    if not full.regions:
        raise ValueError(f"annotation {full.image!r} has no regions")
    k = len(full.regions)
    count = int(rng.integers(1, k + 1))
    picked = rng.choice(k, size=count, replace=False)
    keywords = []
    for i in sorted(picked):
        text = full.regions[i].text
        if text not in keywords:
            keywords.append(text)
    return WeakAnnotation(image=full.image, keywords=keywords)


# -- jsonl serialization ------------------------------------------------------

def _region_record(region: Region) -> dict:
    pts = np.asarray(region.points, dtype=np.float64).reshape(-1, 2)
    return {"points": [[float(x), float(y)] for x, y in pts],
            "text": region.text, "vertical": bool(region.vertical)}


def save_full_annotations(path, annotations):
    with open(path, "w", encoding="utf-8") as f:
        for ann in annotations:
            rec = {"image": ann.image,
                   "regions": [_region_record(r) for r in ann.regions]}
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def save_weak_annotations(path, annotations):
    with open(path, "w", encoding="utf-8") as f:
        for ann in annotations:
            rec = {"image": ann.image, "keywords": list(ann.keywords)}
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def _parse_lines(path):
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(path, line_no, f"bad JSON ({e.msg})") from None


def _require(record, line_no, path, fieldname):
    if fieldname not in record:
        raise SchemaError(path, line_no, fieldname)
    return record[fieldname]


def load_full_annotations(path) -> list[FullAnnotation]:
    out = []
    for line_no, rec in _parse_lines(path):
        image = _require(rec, line_no, path, "image")
        regions = []
        for r in _require(rec, line_no, path, "regions"):
            points = np.asarray(_require(r, line_no, path, "points"), dtype=np.float64)
            if points.ndim != 2 or points.shape[0] < 4 or points.shape[1] != 2:
                raise ParseError(path, line_no, f"bad points shape {points.shape}")
            regions.append(Region(points=points,
                                  text=_require(r, line_no, path, "text"),
                                  vertical=bool(r.get("vertical", False))))
        out.append(FullAnnotation(image=image, regions=regions))
    return out


def load_weak_annotations(path) -> list[WeakAnnotation]:
    out = []
    for line_no, rec in _parse_lines(path):
        out.append(WeakAnnotation(image=_require(rec, line_no, path, "image"),
                                  keywords=list(_require(rec, line_no, path, "keywords"))))
    return out


# -- splits -------------------------------------------------------------------

def split_dataset(annotations, ratios=(4, 1, 1), seed=0):
    """Deterministic stratified split keeping the vertical-image fraction even.

    Images are stratified by whether they contain a vertical region; each
    stratum is shuffled and dealt proportionally so every split's vertical
    fraction stays within 2 points of the global one.
    """
    if any(r <= 0 for r in ratios):
        raise ValueError("ratios must be positive")
    n = len(annotations)
    if n < len(ratios):
        raise TooFewSamples(f"{n} annotations cannot fill {len(ratios)} splits")
    total = sum(ratios)
    sizes = [n * r // total for r in ratios]
    remainders = sorted(range(len(ratios)),
                        key=lambda i: -(n * ratios[i] % total))
    for i in range(n - sum(sizes)):
        sizes[remainders[i % len(ratios)]] += 1
    if any(s == 0 for s in sizes):
        raise TooFewSamples(f"split sizes {sizes} include an empty split")

    rng = np.random.default_rng(seed)
    strata = {False: [], True: []}
    for idx, ann in enumerate(annotations):
        has_vertical = any(r.vertical for r in ann.regions)
        strata[has_vertical].append(idx)
    splits = [[] for _ in ratios]
    for members in strata.values():
        members = [members[i] for i in rng.permutation(len(members))]
        offset = 0
        quotas = [len(members) * s // n for s in sizes]
        for i in range(len(members) - sum(quotas)):
            quotas[i % len(quotas)] += 1
        for split, quota in zip(splits, quotas):
            split.extend(members[offset:offset + quota])
            offset += quota
    out = []
    for split in splits:
        split.sort()
        out.append([annotations[i] for i in split])
    return tuple(out)


# -- images and dataset directories -------------------------------------------

def write_pgm(path, image: np.ndarray):
    """8-bit binary PGM; input values are clipped from [0, 1]."""
    data = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1
    data = np.frombuffer(blob, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).astype(np.float64) / float(maxval)


def image_id(index: int) -> str:
    return f"img_{index:05d}"


def scene_rng(seed: int, index: int, stream: int = 0):
    """Generator for one image; (seed, index) pins the scene, stream 1 the weak view."""
    key = [int(seed), int(index)] + ([int(stream)] if stream else [])
    return np.random.default_rng(key)


def generate_record(spec: SceneSpec, index: int):
    """One (image, full, weak) triple, reproducible from spec.seed and index."""
    image, full = render_scene(spec, scene_rng(spec.seed, index))
    full.image = image_id(index)
    weak = weaken(full, scene_rng(spec.seed, index, stream=1))
    return image, full, weak


def gen_dataset(spec: SceneSpec, count: int, out_dir, jobs: int = 1):
    """Write a dataset directory; parallel jobs do not change the bytes."""
    spec.validate()
    if count < 1:
        raise ValueError("count must be positive")
    out_dir = str(out_dir)
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    if jobs > 1:
        import multiprocessing

        with multiprocessing.Pool(jobs) as pool:
            results = pool.starmap(generate_record,
                                   [(spec, i) for i in range(count)], chunksize=8)
    else:
        results = [generate_record(spec, i) for i in range(count)]
    fulls, weaks = [], []
    for i, (image, full, weak) in enumerate(results):
        write_pgm(os.path.join(img_dir, f"{image_id(i)}.pgm"), image)
        fulls.append(full)
        weaks.append(weak)
    save_full_annotations(os.path.join(out_dir, "full.jsonl"), fulls)
    save_weak_annotations(os.path.join(out_dir, "weak.jsonl"), weaks)
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as f:
        f.write(f"count = {count}\n")
        for key, value in dataclasses.asdict(spec).items():
            if key == "glyph_scales":
                value = ",".join(str(v) for v in value)
            f.write(f"{key} = {value}\n")
        f.write("derivation = image i from rng(seed, i); weak view from rng(seed, i, 1)\n")
    return out_dir


def load_image(dataset_dir, image: str) -> np.ndarray:
    return read_pgm(os.path.join(str(dataset_dir), "images", f"{image}.pgm"))


def to_model_input(gray: np.ndarray) -> np.ndarray:
    """Grayscale image to the 3-channel array the backbone consumes."""
    return np.repeat(gray[:, :, None], 3, axis=2)
