"""Spatial fusion: IDFT alignment, 1x1 aggregation and Swin-Convolution refinement."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from s2ml.errors import ValidationError
from s2ml.spectra import ComplexSpectrum, idft2


def window_partition(x: torch.Tensor, window: int) -> torch.Tensor:
    """[B, C, H, W] -> [B * nWin, window*window, C]; H and W must be multiples of window."""
    B, C, H, W = x.shape
    if H % window or W % window:
        raise ValidationError(f"{H}x{W} not divisible by window {window}")
    x = x.view(B, C, H // window, window, W // window, window)
    x = x.permute(0, 2, 4, 3, 5, 1).contiguous()
    return x.view(-1, window * window, C)


def window_merge(windows: torch.Tensor, window: int, B: int, H: int, W: int) -> torch.Tensor:
    """Inverse of :func:`window_partition`."""
    C = windows.shape[-1]
    x = windows.view(B, H // window, W // window, window, window, C)
    x = x.permute(0, 5, 1, 3, 2, 4).contiguous()
    return x.view(B, C, H, W)


def window_attention(q, k, v, heads: int):
    """Multi-head scaled dot-product attention inside each window.

    q, k, v: [nW, N, C]. Returns (out [nW, N, C], attn [nW, heads, N, N]).
    """
    nW, N, C = q.shape
    if C % heads:
        raise ValidationError(f"heads={heads} does not divide channels={C}")
    d = C // heads

    def split(t):
        return t.view(nW, N, heads, d).transpose(1, 2)

    qh, kh, vh = split(q), split(k), split(v)
    attn = torch.softmax(qh @ kh.transpose(-2, -1) / math.sqrt(d), dim=-1)
    out = (attn @ vh).transpose(1, 2).reshape(nW, N, C)
    return out, attn


class SwinConvBlock(nn.Module):
    """Q/K/V from 3x3 convs, windowed attention, merge conv over (attention + V), residual."""

    def __init__(self, channels: int, window: int = 4, heads: int = 2, shift: bool = False):
        super().__init__()
        if channels % heads:
            raise ValidationError(f"heads={heads} does not divide channels={channels}")
        self.window = window
        self.heads = heads
        self.shift = shift
        self.q_conv = nn.Conv2d(channels, channels, 3, padding=1)
        self.k_conv = nn.Conv2d(channels, channels, 3, padding=1)
        self.v_conv = nn.Conv2d(channels, channels, 3, padding=1)
        self.merge_conv = nn.Conv2d(channels, channels, 3, padding=1)
        self.last_attn = None
        self.keep_attn = False

    def _pad(self, t):
        H, W = t.shape[-2:]
        ph = (-H) % self.window
        pw = (-W) % self.window
        if ph or pw:
            t = F.pad(t, (0, pw, 0, ph), mode="reflect")
        return t

    def attend(self, q, k, v):
        B, C, H, W = q.shape
        q, k, v = self._pad(q), self._pad(k), self._pad(v)
        Hp, Wp = q.shape[-2:]
        s = self.window // 2 if self.shift else 0
        if s:
            q, k, v = (torch.roll(t, shifts=(-s, -s), dims=(-2, -1)) for t in (q, k, v))
        out, attn = window_attention(
            window_partition(q, self.window),
            window_partition(k, self.window),
            window_partition(v, self.window),
            self.heads,
        )
        if self.keep_attn:
            self.last_attn = attn.detach()
        out = window_merge(out, self.window, B, Hp, Wp)
        if s:
            out = torch.roll(out, shifts=(s, s), dims=(-2, -1))
        return out[..., :H, :W]

    def forward(self, x):
        unbatched = x.dim() == 3
        if unbatched:
            x = x.unsqueeze(0)
        v = self.v_conv(x)
        a = self.attend(self.q_conv(x), self.k_conv(x), v)
        out = self.merge_conv(a + v) + x
        return out.squeeze(0) if unbatched else out


class SpatialFusion(nn.Module):
    def __init__(self, channels: int, blocks: int = 2, window: int = 4, heads: int = 2,
                 shift: bool = False):
        super().__init__()
        if blocks < 1:
            raise ValidationError("need at least one Swin-Convolution block")
        self.agg_conv = nn.Conv2d(2 * channels, channels, 1)
        # alternate shifted windows when shift is on, as in Swin
        self.blocks = nn.ModuleList(
            SwinConvBlock(channels, window, heads, shift=shift and j % 2 == 1) for j in range(blocks)
        )
        self.out_conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, S_fused: ComplexSpectrum, F_depth: torch.Tensor, return_sf: bool = False):
        F_sf = idft2(S_fused)
        if F_sf.shape != F_depth.shape:
            raise ValidationError(
                f"fused spectrum {tuple(F_sf.shape)} does not match depth features {tuple(F_depth.shape)}"
            )
        f = self.agg_conv(torch.cat([F_sf, F_depth], dim=-3))
        for block in self.blocks:
            f = block(f)
        out = self.out_conv(f + F_depth)
        return (out, F_sf) if return_sf else out
