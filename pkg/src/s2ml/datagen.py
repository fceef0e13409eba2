"""Synthetic RGB-D scenes, invalid-area carving, RGB degradations, preprocessing and dataset I/O.

Arrays are numpy, channel-first: rgb [3, H, W] in [0, 1], depth [1, H, W] in
meters with 0 marking invalid pixels.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from s2ml.errors import ValidationError
from s2ml.spectra import band_energy, decompose, dft2, make_lowfreq_mask

DEPTH_SCALE = 1000.0  # PNG units per meter (millimeters)


@dataclass
class SceneSpec:
    seed: int = 0
    size: tuple[int, int] = (240, 320)
    depth_range: tuple[float, float] = (0.5, 10.0)
    n_objects: int = 3
    texture_strength: float = 0.3

    def __post_init__(self):
        self.size = tuple(int(s) for s in self.size)
        self.depth_range = tuple(float(d) for d in self.depth_range)
        d_min, d_max = self.depth_range
        if d_min <= 0 or d_max <= d_min:
            raise ValidationError(f"bad depth range {self.depth_range}")
        if min(self.size) < 32:
            raise ValidationError(f"scene size must be at least 32x32, got {self.size}")
        if self.n_objects < 0:
            raise ValidationError("n_objects must be >= 0")


DEGRADATION_KINDS = ("occlusion", "noise", "noise_plus", "pl", "pl_plus")
_DEFAULTS = {
    "occlusion": {"fraction": 0.15},
    "noise": {"sigma": 0.05},
    "noise_plus": {"sigma": 0.15},
    "pl": {"scale": 0.4},
    "pl_plus": {"scale": 0.15},
}


@dataclass
class DegradationSpec:
    kind: str
    fraction: float | None = None
    sigma: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.kind not in DEGRADATION_KINDS:
            raise ValidationError(f"unknown degradation {self.kind!r}; expected one of {DEGRADATION_KINDS}")
        for k, v in _DEFAULTS[self.kind].items():
            if getattr(self, k) is None:
                setattr(self, k, v)
        if self.fraction is not None and not 0 < self.fraction <= 0.5:
            raise ValidationError("occlusion fraction must lie in (0, 0.5]")
        if self.sigma is not None and not 0 <= self.sigma <= 1:
            raise ValidationError("noise sigma must lie in [0, 1]")
        if self.scale is not None and not 0 <= self.scale <= 1:
            raise ValidationError("brightness scale must lie in [0, 1]")


@dataclass
class Sample:
    rgb: np.ndarray
    gt_depth: np.ndarray
    raw_depth: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def valid_mask(self):
        return self.raw_depth > 0


# -- scene generation --------------------------------------------------------

def _smooth_noise(rng, H, W, cells=8):
    coarse = rng.random((1, 1, cells, cells))
    up = F.interpolate(torch.from_numpy(coarse), size=(H, W), mode="bicubic", align_corners=True)
    return up[0, 0].numpy()


def gen_scene(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Render (gt_depth [1,H,W], rgb [3,H,W]) for a room-corner scene with primitives.

    Background is a tilted back wall over a floor plane, kept in the far part
    of the depth range; objects (boxes and ellipsoids) sit in the near part,
    so every object silhouette is a depth jump of at least a quarter of the
    range.
    """
    rng = np.random.default_rng(spec.seed)
    H, W = spec.size
    d_min, d_max = spec.depth_range
    R = d_max - d_min
    yy, xx = np.meshgrid(np.linspace(0, 1, H), np.linspace(0, 1, W), indexing="ij")

    wall = d_min + R * (rng.uniform(0.8, 0.95) + rng.uniform(-0.05, 0.05) * (xx - 0.5))
    horizon = rng.uniform(0.45, 0.7)
    near = d_min + R * rng.uniform(0.55, 0.65)
    t = np.clip((yy - horizon) / (1 - horizon), 0, 1)
    floor_depth = 1.0 / (t / near + (1 - t) / wall)  # perspective-correct blend between wall and near edge
    depth = np.where(yy > horizon, floor_depth, wall)
    label = np.where(yy > horizon, 1, 0)

    for k in range(spec.n_objects):
        cy, cx = rng.uniform(0.25, 0.8), rng.uniform(0.15, 0.85)
        hy, hx = rng.uniform(0.08, 0.2), rng.uniform(0.06, 0.18)
        front = d_min + R * rng.uniform(0.05, 0.3)
        if rng.random() < 0.5:
            inside = (np.abs(yy - cy) < hy) & (np.abs(xx - cx) < hx)
            tilt = rng.uniform(-0.04, 0.04, size=2) * R
            obj = front + tilt[0] * (yy - cy) / hy + tilt[1] * (xx - cx) / hx
        else:
            r2 = ((yy - cy) / hy) ** 2 + ((xx - cx) / hx) ** 2
            inside = r2 < 1
            bulge = R * rng.uniform(0.03, 0.08)
            obj = front - bulge * np.sqrt(np.clip(1 - r2, 0, 1))
        obj = np.maximum(obj, d_min)
        closer = inside & (obj < depth)
        depth = np.where(closer, obj, depth)
        label = np.where(closer, 2 + k, label)

    depth = np.clip(depth, d_min, d_max)

    # Lambertian shading from depth-derived normals
    gy, gx = np.gradient(depth / R * min(H, W) / 4)
    n = np.stack([-gx, -gy, np.ones_like(depth)])
    n /= np.linalg.norm(n, axis=0, keepdims=True)
    light = np.array([rng.uniform(-0.4, 0.4), rng.uniform(-0.6, -0.2), 1.0])
    light /= np.linalg.norm(light)
    shade = 0.35 + 0.65 * np.clip(np.tensordot(light, n, axes=1), 0, 1)
    falloff = 1.0 - 0.35 * (depth - d_min) / R

    palette = rng.uniform(0.15, 0.95, size=(int(label.max()) + 1, 3))
    albedo = palette[label].transpose(2, 0, 1)
    freq = rng.uniform(8, 30)
    angle = rng.uniform(0, np.pi)
    stripes = 0.5 + 0.5 * np.sin(2 * np.pi * freq * (np.cos(angle) * xx + np.sin(angle) * yy))
    texture = 0.5 * stripes + 0.5 * _smooth_noise(rng, H, W)
    albedo = albedo * (1 - spec.texture_strength + spec.texture_strength * texture)[None]

    rgb = np.clip(albedo * (shade * falloff)[None], 0, 1)
    return depth[None].astype(np.float32), rgb.astype(np.float32)


def depth_discontinuities(depth: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean map of pixels with a neighbour-difference above ``threshold``."""
    d = depth[0] if depth.ndim == 3 else depth
    edge = np.zeros(d.shape, dtype=bool)
    dy = np.abs(np.diff(d, axis=0)) > threshold
    dx = np.abs(np.diff(d, axis=1)) > threshold
    edge[:-1] |= dy
    edge[1:] |= dy
    edge[:, :-1] |= dx
    edge[:, 1:] |= dx
    return edge


def max_depth_jump(depth: np.ndarray) -> float:
    d = depth[0] if depth.ndim == 3 else depth
    return float(max(np.abs(np.diff(d, axis=0)).max(), np.abs(np.diff(d, axis=1)).max()))


# -- invalid areas -----------------------------------------------------------

def _blob(H, W, cy, cx, area, rng):
    """Star-shaped blob of roughly ``area`` pixels centred at (cy, cx)."""
    aspect = rng.uniform(0.5, 2.0)
    r0 = math.sqrt(area / math.pi)
    ry, rx = r0 * math.sqrt(aspect), r0 / math.sqrt(aspect)
    theta0 = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:H, 0:W]
    dy, dx = yy - cy, xx - cx
    c, s = math.cos(theta0), math.sin(theta0)
    u = (c * dx + s * dy) / rx
    v = (-s * dx + c * dy) / ry
    ang = np.arctan2(v, u)
    k = int(rng.integers(2, 6))
    wobble = 1 + 0.25 * np.sin(k * ang + rng.uniform(0, 2 * np.pi))
    return np.hypot(u, v) <= wobble


def carve_mask(gt_depth: np.ndarray, coverage: float, seed: int, edge_every: int = 3,
               max_blob: float = 0.04):
    """Invalid-pixel mask plus the blob seeds used.

    Blobs are added until the covered fraction reaches ``coverage - 0.01``;
    each blob is capped at ``max_blob`` of the image so the result overshoots
    by at most that much. Two of every three seeds sit within 3 px of a depth
    discontinuity when the map has any.
    """
    if not 0.0 <= coverage <= 0.5:
        raise ValidationError(f"coverage must lie in [0, 0.5], got {coverage}")
    d = gt_depth[0] if gt_depth.ndim == 3 else gt_depth
    H, W = d.shape
    mask = np.zeros((H, W), dtype=bool)
    seeds = []
    if coverage == 0:
        return mask, seeds
    rng = np.random.default_rng(seed)
    valid = d[d > 0]
    R = float(valid.max() - valid.min()) if valid.size else 1.0
    edges = depth_discontinuities(d, max(0.05 * R, 1e-6))
    near_edge = np.argwhere(_dilate(edges, 3))
    target = coverage - 0.01
    i = 0
    while mask.mean() < target:
        if near_edge.size and i % edge_every != edge_every - 1:
            cy, cx = near_edge[rng.integers(len(near_edge))]
        else:
            cy, cx = rng.integers(H), rng.integers(W)
        remaining = (coverage - mask.mean()) * H * W
        area = rng.uniform(0.3, 1.0) * min(max_blob * H * W, max(remaining, 4.0))
        mask |= _blob(H, W, cy, cx, area, rng)
        seeds.append((int(cy), int(cx)))
        i += 1
    return mask, seeds


def _dilate(m: np.ndarray, r: int) -> np.ndarray:
    t = torch.from_numpy(m.astype(np.float32))[None, None]
    return (F.max_pool2d(t, 2 * r + 1, stride=1, padding=r)[0, 0] > 0).numpy()


def carve_invalid(gt_depth: np.ndarray, coverage: float, seed: int) -> np.ndarray:
    mask, _ = carve_mask(gt_depth, coverage, seed)
    raw = gt_depth.copy()
    raw[..., mask] = 0
    return raw


def occlude_random(depth: np.ndarray, fraction: float = 0.15, seed: int = 0) -> np.ndarray:
    """Zero random axis-aligned rectangles covering ``fraction`` (+-0.01) of the image."""
    if not 0 < fraction <= 0.5:
        raise ValidationError(f"occlusion fraction must lie in (0, 0.5], got {fraction}")
    mask = _rect_mask(depth.shape[-2:], fraction, np.random.default_rng(seed))
    out = depth.copy()
    out[..., mask] = 0
    return out


def _rect_mask(shape, fraction, rng):
    H, W = shape
    mask = np.zeros((H, W), dtype=bool)
    while mask.mean() < fraction - 0.01:
        remaining = fraction - mask.mean() + 0.01
        area = rng.uniform(0.3, 1.0) * min(remaining, fraction / 2) * H * W
        aspect = rng.uniform(0.5, 2.0)
        h = int(max(1, min(H, round(math.sqrt(area * aspect)))))
        w = int(max(1, min(W, area // h)))
        y = rng.integers(0, H - h + 1)
        x = rng.integers(0, W - w + 1)
        mask[y:y + h, x:x + w] = True
    return mask


# -- RGB degradations --------------------------------------------------------

def degrade_rgb(rgb: np.ndarray, spec: DegradationSpec, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if spec.kind == "occlusion":
        out = rgb.copy()
        out[..., _rect_mask(rgb.shape[-2:], spec.fraction, rng)] = 0
        return out
    if spec.kind in ("noise", "noise_plus"):
        noisy = rgb + rng.normal(0.0, spec.sigma, size=rgb.shape)
        return np.clip(noisy, 0, 1).astype(rgb.dtype)
    # pl / pl_plus
    return np.clip(rgb * np.asarray(spec.scale, dtype=rgb.dtype), 0, 1).astype(rgb.dtype)


# -- preprocessing -----------------------------------------------------------

def pipeline_resize_crop(img: np.ndarray, target=(240, 320), crop=(192, 288),
                         is_depth: bool = False) -> np.ndarray:
    """Resize to ``target`` (nearest for depth, bilinear otherwise) then center crop."""
    if img.ndim != 3:
        raise ValidationError("expected a channel-first [C, H, W] array")
    th, tw = target
    ch, cw = crop
    H, W = img.shape[-2:]
    if th < ch or tw < cw:
        raise ValidationError(f"resize target {target} is smaller than crop {crop}")
    if H < ch or W < cw:
        raise ValidationError(f"input {H}x{W} is smaller than crop {crop}")
    if (H, W) != (th, tw):
        t = torch.from_numpy(np.ascontiguousarray(img))[None]
        if is_depth:
            t = F.interpolate(t, size=(th, tw), mode="nearest")
        else:
            t = F.interpolate(t, size=(th, tw), mode="bilinear", align_corners=False)
        img = t[0].numpy()
    y0 = (th - ch) // 2
    x0 = (tw - cw) // 2
    return np.ascontiguousarray(img[:, y0:y0 + ch, x0:x0 + cw])


# -- spectrum analysis -------------------------------------------------------

@dataclass
class SpectrumReport:
    gt_low: float
    gt_high: float
    raw_low: float
    raw_high: float
    rho: float

    @property
    def low_delta(self):
        return self.raw_low - self.gt_low

    @property
    def high_delta(self):
        return self.raw_high - self.gt_high

    @property
    def gt_high_share(self):
        return self.gt_high / (self.gt_low + self.gt_high)

    @property
    def raw_high_share(self):
        return self.raw_high / (self.raw_low + self.raw_high)

    @property
    def high_share_delta(self):
        return self.raw_high_share - self.gt_high_share

    def to_dict(self):
        d = asdict(self)
        d.update(low_delta=self.low_delta, high_delta=self.high_delta,
                 gt_high_share=self.gt_high_share, raw_high_share=self.raw_high_share,
                 high_share_delta=self.high_share_delta)
        return d


def spectrum_report(gt_depth: np.ndarray, raw_depth: np.ndarray, rho: float = 0.25) -> SpectrumReport:
    if gt_depth.shape != raw_depth.shape:
        raise ValidationError("gt and raw depth maps are not aligned")
    g = torch.as_tensor(np.asarray(gt_depth, dtype=np.float64))
    r = torch.as_tensor(np.asarray(raw_depth, dtype=np.float64))
    mask = make_lowfreq_mask(*g.shape[-2:], rho=rho, dtype=torch.float64)
    gl, gh = band_energy(decompose(dft2(g)), mask)
    rl, rh = band_energy(decompose(dft2(r)), mask)
    return SpectrumReport(gl, gh, rl, rh, rho)


# -- image and dataset I/O ---------------------------------------------------

def quantize_depth(depth: np.ndarray) -> np.ndarray:
    mm = np.clip(np.round(depth.astype(np.float64) * DEPTH_SCALE), 0, 65535)
    return (mm / DEPTH_SCALE).astype(np.float32)


def quantize_rgb(rgb: np.ndarray) -> np.ndarray:
    return (np.round(np.clip(rgb, 0, 1) * 255.0).astype(np.uint8) / np.float32(255.0)).astype(np.float32)


def save_depth_png(path, depth: np.ndarray):
    d = depth[0] if depth.ndim == 3 else depth
    mm = np.clip(np.round(d.astype(np.float64) * DEPTH_SCALE), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(path)


def load_depth_png(path) -> np.ndarray:
    mm = np.asarray(Image.open(path), dtype=np.uint16)
    return (mm.astype(np.float64) / DEPTH_SCALE).astype(np.float32)[None]


def save_rgb_png(path, rgb: np.ndarray):
    u8 = np.round(np.clip(rgb, 0, 1) * 255.0).astype(np.uint8)
    Image.fromarray(np.ascontiguousarray(u8.transpose(1, 2, 0))).save(path)


def load_rgb_png(path) -> np.ndarray:
    u8 = np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)
    return (u8.transpose(2, 0, 1) / np.float32(255.0)).astype(np.float32)


MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["format", "units", "samples"],
    "properties": {
        "format": {"const": "s2ml-dataset-1"},
        "units": {
            "type": "object",
            "required": ["depth", "depth_scale", "rgb"],
        },
        "samples": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "split", "rgb", "depth_raw", "depth_gt", "seed"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[0-9]{4,}$"},
                    "split": {"enum": ["train", "test"]},
                    "seed": {"type": "integer"},
                },
            },
        },
    },
}


def make_sample(seed: int, size=(240, 320), crop=(192, 288), coverage: float | None = None,
                scene: SceneSpec | None = None) -> Sample:
    """One dataset sample: render at ``size``, center crop, quantize to the on-disk formats, carve holes."""
    rng = np.random.default_rng(seed)
    scene = scene or SceneSpec(seed=seed, size=size, n_objects=int(rng.integers(1, 5)),
                               texture_strength=float(rng.uniform(0.1, 0.5)))
    if coverage is None:
        coverage = float(rng.uniform(0.1, 0.3))
    depth, rgb = gen_scene(scene)
    if crop is not None:
        depth = pipeline_resize_crop(depth, scene.size, crop, is_depth=True)
        rgb = pipeline_resize_crop(rgb, scene.size, crop)
    depth = quantize_depth(depth)
    rgb = quantize_rgb(rgb)
    raw = carve_invalid(depth, coverage, seed + 7919)
    meta = {"seed": seed, "scene": asdict(scene), "coverage": coverage}
    return Sample(rgb=rgb, gt_depth=depth, raw_depth=raw, meta=meta)


def save_dataset(samples: list[Sample], out_dir, splits: list[str] | None = None) -> Path:
    out = Path(out_dir)
    for sub in ("rgb", "depth_raw", "depth_gt"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    splits = splits or ["train"] * len(samples)
    entries = []
    for i, (s, split) in enumerate(zip(samples, splits)):
        sid = f"{i:04d}"
        save_rgb_png(out / "rgb" / f"{sid}.png", s.rgb)
        save_depth_png(out / "depth_raw" / f"{sid}.png", s.raw_depth)
        save_depth_png(out / "depth_gt" / f"{sid}.png", s.gt_depth)
        entries.append({
            "id": sid, "split": split, "seed": int(s.meta.get("seed", i)),
            "rgb": f"rgb/{sid}.png", "depth_raw": f"depth_raw/{sid}.png",
            "depth_gt": f"depth_gt/{sid}.png", "meta": _jsonable(s.meta),
        })
    manifest = {
        "format": "s2ml-dataset-1",
        "units": {"depth": "millimeter", "depth_scale": DEPTH_SCALE, "rgb": "uint8"},
        "samples": entries,
    }
    jsonschema.validate(manifest, MANIFEST_SCHEMA)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return out


def _jsonable(x):
    return json.loads(json.dumps(x, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


def load_manifest(data_dir) -> dict:
    path = Path(data_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    manifest = json.loads(path.read_text())
    jsonschema.validate(manifest, MANIFEST_SCHEMA)
    return manifest


def load_dataset(data_dir, split: str | None = None) -> list[Sample]:
    root = Path(data_dir)
    manifest = load_manifest(root)
    out = []
    for e in manifest["samples"]:
        if split is not None and e["split"] != split:
            continue
        out.append(Sample(
            rgb=load_rgb_png(root / e["rgb"]),
            gt_depth=load_depth_png(root / e["depth_gt"]),
            raw_depth=load_depth_png(root / e["depth_raw"]),
            meta={"id": e["id"], "seed": e["seed"], **e.get("meta", {})},
        ))
    return out


def generate_dataset(out_dir, n: int = 320, seed: int = 0, n_test: int | None = None,
                     size=(240, 320), crop=(192, 288)) -> Path:
    """Write the toy benchmark: the last ``n_test`` samples (default 20%, at least one) form the test split."""
    if n < 1:
        raise ValidationError("need at least one sample")
    if n_test is None:
        n_test = 64 if n == 320 else max(n // 5, 1 if n > 1 else 0)
    samples = [make_sample(seed * 100003 + i, size=size, crop=crop) for i in range(n)]
    splits = ["train"] * (n - n_test) + ["test"] * n_test
    return save_dataset(samples, out_dir, splits)


def load_nyu_stub(root):
    """Expected layout for real NYU-Depth v2 / SUN RGB-D data (not shipped).

    Convert to the synthetic layout (``rgb/``, ``depth_raw/``, ``depth_gt/``
    PNGs plus ``manifest.json``) and load with :func:`load_dataset`.
    """
    raise NotImplementedError(
        "benchmark ingestion is not included; convert to the rgb/, depth_raw/, depth_gt/ layout"
    )
