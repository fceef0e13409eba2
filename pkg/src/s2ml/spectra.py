"""2D Fourier transforms, polar decomposition, low-frequency masks and band energies.

All transforms act on the last two dimensions, so any leading batch/channel
layout works. Spectra are kept as pairs of real tensors; the DC bin sits at
index (0, 0) (no fftshift).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from s2ml.errors import ValidationError


@dataclass
class ComplexSpectrum:
    real: torch.Tensor
    imag: torch.Tensor

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ValidationError(
                f"real/imag shape mismatch: {tuple(self.real.shape)} vs {tuple(self.imag.shape)}"
            )

    @property
    def shape(self):
        return self.real.shape

    def as_complex(self) -> torch.Tensor:
        return torch.complex(self.real, self.imag)


@dataclass
class PolarSpectrum:
    amplitude: torch.Tensor
    phase: torch.Tensor

    @property
    def shape(self):
        return self.amplitude.shape


@dataclass
class LowFreqMask:
    mask: torch.Tensor  # [H, W], entries 0/1
    rho: float
    alpha: float


def _check_finite(x: torch.Tensor, what: str):
    if not torch.isfinite(x).all():
        raise ValidationError(f"{what} contains non-finite values")


def dft2(x: torch.Tensor) -> ComplexSpectrum:
    """Unnormalized forward DFT over the last two axes."""
    if x.dim() < 2 or x.shape[-1] < 2 or x.shape[-2] < 2:
        raise ValidationError(f"need spatial dims >= 2x2, got {tuple(x.shape)}")
    _check_finite(x, "dft2 input")
    s = torch.fft.fft2(x, dim=(-2, -1), norm="backward")
    return ComplexSpectrum(s.real, s.imag)


def idft2(s: ComplexSpectrum) -> torch.Tensor:
    """Inverse DFT with 1/(H*W) scaling; returns the real part."""
    if s.real.shape != s.imag.shape:
        raise ValidationError("real/imag shape mismatch")
    _check_finite(s.real, "spectrum real part")
    _check_finite(s.imag, "spectrum imaginary part")
    return torch.fft.ifft2(s.as_complex(), dim=(-2, -1), norm="backward").real


def wrap_phase(phi: torch.Tensor) -> torch.Tensor:
    """Map angles into (-pi, pi]."""
    two_pi = 2 * math.pi
    return phi - two_pi * torch.ceil((phi - math.pi) / two_pi)


def decompose(s: ComplexSpectrum) -> PolarSpectrum:
    """Amplitude and two-argument phase; zero bins get amplitude 0 and phase 0.

    Gradients at zero bins are defined as 0 rather than NaN.
    """
    sq = s.real * s.real + s.imag * s.imag
    nz = sq > 0
    amp = torch.where(nz, torch.sqrt(torch.where(nz, sq, torch.ones_like(sq))), torch.zeros_like(sq))
    re = torch.where(nz, s.real, torch.ones_like(s.real))
    im = torch.where(nz, s.imag, torch.zeros_like(s.imag))
    phase = torch.atan2(im, re)
    # atan2 returns -pi for (-x, -0.0); fold onto +pi
    phase = torch.where(phase <= -math.pi, phase + 2 * math.pi, phase)
    phase = torch.where(nz, phase, torch.zeros_like(phase))
    return PolarSpectrum(amp, phase)


def recompose(p: PolarSpectrum) -> ComplexSpectrum:
    if p.amplitude.shape != p.phase.shape:
        raise ValidationError("amplitude/phase shape mismatch")
    if (p.amplitude < 0).any():
        raise ValidationError("negative amplitude")
    return ComplexSpectrum(p.amplitude * torch.cos(p.phase), p.amplitude * torch.sin(p.phase))


def make_lowfreq_mask(H: int, W: int, rho: float = 0.25, alpha: float = 0.5,
                      dtype=torch.float32, device=None) -> LowFreqMask:
    """Binary disk around DC using wrap-around frequency distance.

    A bin is inside when its circular distance to (0, 0) is at most
    ``rho * min(H, W) / 2``.
    """
    if H < 2 or W < 2:
        raise ValidationError(f"mask needs H, W >= 2, got {H}x{W}")
    if not 0.0 <= rho <= 1.0:
        raise ValidationError(f"rho must lie in [0, 1], got {rho}")
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValidationError(f"alpha must be positive and finite, got {alpha}")
    u = torch.arange(H, dtype=torch.float64, device=device)
    v = torch.arange(W, dtype=torch.float64, device=device)
    du = torch.minimum(u, H - u)
    dv = torch.minimum(v, W - v)
    d2 = du[:, None] ** 2 + dv[None, :] ** 2
    radius = rho * min(H, W) / 2
    mask = (d2 <= radius * radius).to(dtype)
    return LowFreqMask(mask=mask, rho=float(rho), alpha=float(alpha))


def band_energy(p: PolarSpectrum, mask: LowFreqMask) -> tuple[float, float]:
    """(low, high) sums of squared amplitude inside/outside the mask."""
    if p.amplitude.shape[-2:] != mask.mask.shape:
        raise ValidationError(
            f"mask shape {tuple(mask.mask.shape)} does not match spectrum {tuple(p.amplitude.shape)}"
        )
    e = p.amplitude.double() ** 2
    m = mask.mask.to(torch.bool)
    low = e[..., m].sum().item()
    high = e[..., ~m].sum().item()
    return low, high
