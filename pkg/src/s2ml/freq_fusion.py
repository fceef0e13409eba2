"""Frequency fusion of depth and RGB feature spectra.

Amplitudes are fused band-wise after rescaling the low-frequency disk;
phases are fused by a sigmoid attention map computed from the phase
difference. Ablation variants of the module live here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from s2ml.errors import ValidationError
from s2ml.spectra import (
    ComplexSpectrum,
    LowFreqMask,
    PolarSpectrum,
    decompose,
    dft2,
    idft2,
    make_lowfreq_mask,
    recompose,
    wrap_phase,
)

VARIANTS = ("full", "V1", "V2", "V3", "V4", "V5")


@dataclass
class SpectrumDiff:
    phase_sub: torch.Tensor
    amp_sub: torch.Tensor


def spectrum_difference(depth: PolarSpectrum, rgb: PolarSpectrum) -> SpectrumDiff:
    if depth.amplitude.shape != rgb.amplitude.shape or depth.phase.shape != rgb.phase.shape:
        raise ValidationError(
            f"spectrum shapes differ: {tuple(depth.shape)} vs {tuple(rgb.shape)}"
        )
    return SpectrumDiff(
        phase_sub=(depth.phase - rgb.phase).abs(),
        amp_sub=(depth.amplitude - rgb.amplitude).abs(),
    )


def rescale_lowfreq(A: torch.Tensor, mask: LowFreqMask) -> torch.Tensor:
    """alpha*M*A + (1-M)*A, with M broadcast over leading dims."""
    M = mask.mask.to(dtype=A.dtype, device=A.device)
    return mask.alpha * M * A + (1 - M) * A


def fuse_amplitude(A_depth_star, A_sub_star, A_depth, amp_fuse_conv: nn.Module) -> torch.Tensor:
    """conv(cat(A_depth*, A_sub*)) + A_depth, clamped at zero."""
    fused = amp_fuse_conv(torch.cat([A_depth_star, A_sub_star], dim=-3)) + A_depth
    return fused.clamp(min=0)


def phase_attention_logits(phi_sub: torch.Tensor, phase_attn_conv: nn.Module) -> torch.Tensor:
    stats = torch.cat(
        [phi_sub.mean(dim=-3, keepdim=True), phi_sub.amax(dim=-3, keepdim=True)], dim=-3
    )
    return phase_attn_conv(stats)


def fuse_phase(phi_depth, phi_sub, phase_attn_conv: nn.Module, wrap: bool = True) -> torch.Tensor:
    """sigmoid(conv(cat(mean(phi_sub), max(phi_sub)))) * phi_depth + phi_depth.

    The attention map has either one channel (broadcast over C) or C channels,
    depending on how the conv was built.
    """
    score = torch.sigmoid(phase_attention_logits(phi_sub, phase_attn_conv))
    phi = score * phi_depth + phi_depth
    return wrap_phase(phi) if wrap else phi


def as_spectrum(x) -> ComplexSpectrum:
    return x if isinstance(x, ComplexSpectrum) else dft2(x)


def as_spatial(x) -> torch.Tensor:
    return idft2(x) if isinstance(x, ComplexSpectrum) else x


class FreqFusion(nn.Module):
    """Full amplitude/phase fusion, with V3/V4 path removal switches.

    ``attention="spatial"`` gives one attention channel broadcast across the C
    feature channels; ``attention="channel"`` gives one score per channel.
    """

    def __init__(self, channels: int, rho: float = 0.25, alpha: float = 0.5,
                 attention: str = "spatial", attn_kernel: int = 7,
                 use_amplitude: bool = True, use_phase: bool = True):
        super().__init__()
        if attention not in ("spatial", "channel"):
            raise ValidationError(f"unknown attention mode {attention!r}")
        self.channels = channels
        self.rho = rho
        self.alpha = alpha
        self.attention = attention
        self.use_amplitude = use_amplitude
        self.use_phase = use_phase
        if use_amplitude:
            self.amp_fuse_conv = nn.Conv2d(2 * channels, channels, kernel_size=1)
        if use_phase:
            out = 1 if attention == "spatial" else channels
            self.phase_attn_conv = nn.Conv2d(2, out, kernel_size=attn_kernel,
                                             padding=attn_kernel // 2)
        self._masks: dict = {}

    def mask_for(self, H: int, W: int, dtype, device) -> LowFreqMask:
        key = (H, W, dtype, str(device))
        if key not in self._masks:
            self._masks[key] = make_lowfreq_mask(H, W, self.rho, self.alpha, dtype=dtype, device=device)
        return self._masks[key]

    def fuse_polar(self, pd: PolarSpectrum, pr: PolarSpectrum) -> PolarSpectrum:
        diff = spectrum_difference(pd, pr)
        H, W = pd.amplitude.shape[-2:]
        mask = self.mask_for(H, W, pd.amplitude.dtype, pd.amplitude.device)
        if self.use_amplitude:
            amp = fuse_amplitude(
                rescale_lowfreq(pd.amplitude, mask),
                rescale_lowfreq(diff.amp_sub, mask),
                pd.amplitude,
                self.amp_fuse_conv,
            )
        else:
            amp = pd.amplitude
        if self.use_phase:
            phase = fuse_phase(pd.phase, diff.phase_sub, self.phase_attn_conv)
        else:
            phase = pd.phase
        return PolarSpectrum(amp, phase)

    def forward(self, F_depth, F_rgb_or_spec, return_polar: bool = False):
        sd = as_spectrum(F_depth)
        sr = as_spectrum(F_rgb_or_spec)
        if sd.shape != sr.shape:
            raise ValidationError(f"depth/rgb spectra differ: {tuple(sd.shape)} vs {tuple(sr.shape)}")
        polar = self.fuse_polar(decompose(sd), decompose(sr))
        fused = recompose(polar)
        return (fused, polar) if return_polar else fused


class SpatialMLPFusion(nn.Module):
    """V1: per-pixel MLP on concatenated spatial features, residual on depth."""

    def __init__(self, channels: int, hidden: int | None = None):
        super().__init__()
        hidden = hidden or 2 * channels
        self.mlp = nn.Sequential(
            nn.Conv2d(2 * channels, hidden, 1), nn.GELU(), nn.Conv2d(hidden, channels, 1)
        )

    def forward(self, F_depth, F_rgb_or_spec, return_polar: bool = False):
        fd = as_spatial(F_depth)
        fr = as_spatial(F_rgb_or_spec)
        out = dft2(fd + self.mlp(torch.cat([fd, fr], dim=-3)))
        return (out, decompose(out)) if return_polar else out


class SpectralMLPFusion(nn.Module):
    """V2: per-bin MLP on concatenated real/imag planes of both spectra."""

    def __init__(self, channels: int, hidden: int | None = None):
        super().__init__()
        hidden = hidden or 2 * channels
        self.channels = channels
        self.mlp = nn.Sequential(
            nn.Conv2d(4 * channels, hidden, 1), nn.GELU(), nn.Conv2d(hidden, 2 * channels, 1)
        )

    def forward(self, F_depth, F_rgb_or_spec, return_polar: bool = False):
        sd = as_spectrum(F_depth)
        sr = as_spectrum(F_rgb_or_spec)
        delta = self.mlp(torch.cat([sd.real, sd.imag, sr.real, sr.imag], dim=-3))
        dr, di = torch.split(delta, self.channels, dim=-3)
        out = ComplexSpectrum(sd.real + dr, sd.imag + di)
        return (out, decompose(out)) if return_polar else out


class ConvPolarFusion(nn.Module):
    """V5: amplitude and phase each fused by a plain 1x1 conv over the two modalities.

    No low-frequency rescaling and no attention; the depth planes are kept as a
    residual like in the full module.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.amp_conv = nn.Conv2d(2 * channels, channels, 1)
        self.phase_conv = nn.Conv2d(2 * channels, channels, 1)

    def forward(self, F_depth, F_rgb_or_spec, return_polar: bool = False):
        pd = decompose(as_spectrum(F_depth))
        pr = decompose(as_spectrum(F_rgb_or_spec))
        amp = (self.amp_conv(torch.cat([pd.amplitude, pr.amplitude], dim=-3)) + pd.amplitude).clamp(min=0)
        phase = wrap_phase(self.phase_conv(torch.cat([pd.phase, pr.phase], dim=-3)) + pd.phase)
        polar = PolarSpectrum(amp, phase)
        out = recompose(polar)
        return (out, polar) if return_polar else out


def build_freq_fusion(variant: str, channels: int, rho: float = 0.25, alpha: float = 0.5,
                      attention: str = "spatial") -> nn.Module:
    if variant == "full":
        return FreqFusion(channels, rho, alpha, attention)
    if variant == "V1":
        return SpatialMLPFusion(channels)
    if variant == "V2":
        return SpectralMLPFusion(channels)
    if variant == "V3":
        return FreqFusion(channels, rho, alpha, attention, use_amplitude=False)
    if variant == "V4":
        return FreqFusion(channels, rho, alpha, attention, use_phase=False)
    if variant == "V5":
        return ConvPolarFusion(channels)
    raise ValidationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
