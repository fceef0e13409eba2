"""End-to-end depth completion network: stems, N spatio-spectral fusion pairs, depth head."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass, fields

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from s2ml.errors import ValidationError
from s2ml.freq_fusion import VARIANTS, build_freq_fusion
from s2ml.spatial_fusion import SpatialFusion
from s2ml.spectra import ComplexSpectrum


@dataclass
class S2MLConfig:
    channels: int = 32
    pairs: int = 2
    blocks_per_pair: int = 2
    window: int = 4
    heads: int = 2
    rho: float = 0.25
    alpha: float = 0.5
    downsample: int = 4
    variant: str = "full"
    attention: str = "spatial"
    shift: bool = False

    def __post_init__(self):
        for name in ("channels", "pairs", "blocks_per_pair", "window", "heads"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.downsample not in (1, 2, 4):
            raise ValidationError("downsample must be 1, 2 or 4 (stride-2 stem convs)")
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}")
        if self.alpha <= 0 or not 0 <= self.rho <= 1:
            raise ValidationError("need alpha > 0 and rho in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "S2MLConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


class ResBlock(nn.Module):
    def __init__(self, c):
        super().__init__()
        self.conv1 = nn.Conv2d(c, c, 3, padding=1)
        self.conv2 = nn.Conv2d(c, c, 3, padding=1)

    def forward(self, x):
        return F.relu(x + self.conv2(F.relu(self.conv1(x))))


class Stem(nn.Module):
    """Toy residual backbone: log2(downsample) stride-2 convs then two residual blocks."""

    def __init__(self, in_ch: int, channels: int, downsample: int):
        super().__init__()
        layers = []
        c = in_ch
        n_down = {1: 0, 2: 1, 4: 2}[downsample]
        for _ in range(n_down):
            layers += [nn.Conv2d(c, channels, 3, stride=2, padding=1), nn.ReLU()]
            c = channels
        if n_down == 0:
            layers += [nn.Conv2d(c, channels, 3, padding=1), nn.ReLU()]
        layers += [ResBlock(channels), ResBlock(channels)]
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        return self.body(x)


class DepthHead(nn.Module):
    """3x3 conv, bilinear upsample by the stem factor, 3x3 conv to one channel."""

    def __init__(self, channels: int, downsample: int):
        super().__init__()
        self.downsample = downsample
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, 1, 3, padding=1)

    def forward(self, f):
        x = self.conv1(f)
        if self.downsample > 1:
            x = F.interpolate(x, scale_factor=self.downsample, mode="bilinear", align_corners=False)
        return self.conv2(x)


class FusionPair(nn.Module):
    def __init__(self, cfg: S2MLConfig):
        super().__init__()
        self.freq = build_freq_fusion(cfg.variant, cfg.channels, cfg.rho, cfg.alpha, cfg.attention)
        self.spatial = SpatialFusion(cfg.channels, cfg.blocks_per_pair, cfg.window, cfg.heads, cfg.shift)


class S2ML(nn.Module):
    def __init__(self, cfg: S2MLConfig | None = None):
        super().__init__()
        self.cfg = cfg or S2MLConfig()
        c = self.cfg
        self.rgb_embed = Stem(3, c.channels, c.downsample)
        self.depth_embed = Stem(1, c.channels, c.downsample)
        self.pair_list = nn.ModuleList(FusionPair(c) for _ in range(c.pairs))
        self.head = DepthHead(c.channels, c.downsample)

    def embed(self, rgb, raw_depth):
        if rgb.dim() != 4 or raw_depth.dim() != 4 or rgb.shape[1] != 3 or raw_depth.shape[1] != 1:
            raise ValidationError("expected rgb [B,3,H,W] and raw_depth [B,1,H,W]")
        if rgb.shape[-2:] != raw_depth.shape[-2:]:
            raise ValidationError("rgb and depth spatial sizes differ")
        H, W = rgb.shape[-2:]
        ds = self.cfg.downsample
        if H % ds or W % ds:
            raise ValidationError(f"{H}x{W} not divisible by downsample {ds}")
        return self.rgb_embed(rgb), self.depth_embed(raw_depth)

    def features(self, rgb, raw_depth, trace: bool = False):
        """Run the pair cascade; returns final features and, with trace, per-pair tensors."""
        f_rgb, f_depth = self.embed(rgb, raw_depth)
        carry = f_rgb
        records = []
        for pair in self.pair_list:
            s_fused = pair.freq(f_depth, carry)
            f_out, f_sf = pair.spatial(s_fused, f_depth, return_sf=True)
            if trace:
                records.append(dict(depth_in=f_depth, rgb_side_in=carry, s_fused=s_fused,
                                    f_sf=f_sf, f_out=f_out))
            carry = s_fused
            f_depth = f_out
        return f_depth, records

    def forward(self, rgb, raw_depth):
        f, _ = self.features(rgb, raw_depth)
        return self.head(f)

    @torch.no_grad()
    def residual_maps(self, rgb, raw_depth, i: int):
        """(R_FF, R_FI) for pair i (1-based), unnormalized."""
        if not 1 <= i <= self.cfg.pairs:
            raise ValidationError(f"pair index {i} outside 1..{self.cfg.pairs}")
        _, rec = self.features(rgb, raw_depth, trace=True)
        r = rec[i - 1]
        return self.head(r["f_sf"] - r["depth_in"]), self.head(r["f_out"] - r["depth_in"])


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def apply_variant(model: S2ML, variant: str, seed: int | None = None) -> S2ML:
    """Copy of ``model`` with each pair's frequency fusion rebuilt for ``variant``.

    Backbones, spatial fusion and head weights are carried over.
    """
    cfg = dataclasses.replace(model.cfg, variant=variant)
    if seed is not None:
        torch.manual_seed(seed)
    new = S2ML(cfg)
    own = model.state_dict()
    target = new.state_dict()
    carried = {k: v for k, v in own.items() if ".freq." not in k and k in target}
    new.load_state_dict(carried, strict=False)
    return new


def zero_fusion_params(model: nn.Module):
    """Zero every parameter of every frequency fusion module (in place)."""
    with torch.no_grad():
        for name, p in model.named_parameters():
            if ".freq." in name or name.startswith("freq."):
                p.zero_()
    return model


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(model: S2ML, path, extra: dict | None = None):
    """Named-tensor .npz archive; entry ``__manifest__`` holds config + tensor table as JSON."""
    state = model.state_dict()
    arrays = {}
    table = []
    for name, t in state.items():
        a = t.detach().cpu().numpy()
        arrays[name] = a
        table.append({"name": name, "shape": list(a.shape), "dtype": str(a.dtype)})
    manifest = {"format": "s2ml-ckpt-1", "config": asdict(model.cfg), "tensors": table,
                "extra": extra or {}}
    arrays["__manifest__"] = np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[S2ML, dict]:
    with np.load(path, allow_pickle=False) as z:
        manifest = json.loads(z["__manifest__"].tobytes().decode())
        model = S2ML(S2MLConfig.from_dict(manifest["config"]))
        state = {}
        for entry in manifest["tensors"]:
            a = z[entry["name"]]
            if list(a.shape) != entry["shape"] or str(a.dtype) != entry["dtype"]:
                raise ValidationError(f"checkpoint tensor {entry['name']} does not match manifest")
            state[entry["name"]] = torch.from_numpy(a.copy())
    model.load_state_dict(state, strict=True)
    model.to(dtype=state[next(iter(state))].dtype)
    return model, manifest


def wiring_holds(records) -> bool:
    """Pair i >= 2 takes F_out^{i-1} as its depth side and S_fused^{i-1} as its spectral carry."""
    for prev, cur in zip(records, records[1:]):
        if cur["depth_in"] is not prev["f_out"]:
            return False
        if not isinstance(cur["rgb_side_in"], ComplexSpectrum) or cur["rgb_side_in"] is not prev["s_fused"]:
            return False
    return True
