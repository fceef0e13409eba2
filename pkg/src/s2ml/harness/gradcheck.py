"""Central finite differences against autograd, in float64."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from s2ml.freq_fusion import FreqFusion
from s2ml.network import DepthHead, S2ML, S2MLConfig
from s2ml.objective import total_loss
from s2ml.spatial_fusion import SpatialFusion
from s2ml.spectra import ComplexSpectrum, dft2

MODULES = ("freq_fusion", "spatial_fusion", "depth_head", "network", "objective")


@dataclass
class GradReport:
    module: str
    max_rel_err: float
    n_checked: int
    failures: list[str] = field(default_factory=list)
    worst: str = ""

    @property
    def ok(self):
        return not self.failures


def rel_err(a: float, n: float, floor: float = 1e-6) -> float:
    """|a - n| relative to the larger magnitude; ``floor`` stops exact zeros from dividing by 0."""
    return abs(a - n) / max(abs(a), abs(n), floor)


def check_gradients(loss_fn, named_tensors: dict[str, torch.Tensor], n_samples: int = 24,
                    eps: float = 1e-6, tol: float = 1e-3, seed: int = 0, module: str = "",
                    grad_hook=None) -> GradReport:
    """Compare d loss / d t[k] from autograd with (f(t+eps) - f(t-eps)) / 2eps.

    Elements are drawn round-robin over the tensors so every tensor is hit.
    The relative-error floor is 1e-11 * max(1, |f|) / eps, the roundoff level
    of a central difference in float64; smaller gradients are treated as zero.
    ``grad_hook(name, grad)`` may rewrite analytic gradients (negative controls).
    """
    names = list(named_tensors)
    tensors = [named_tensors[n] for n in names]
    for t in tensors:
        t.requires_grad_(True)
        t.grad = None
    loss = loss_fn()
    floor = 1e-11 * max(1.0, abs(loss.item())) / eps
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    grads = [torch.zeros_like(t) if g is None else g for g, t in zip(grads, tensors)]
    if grad_hook is not None:
        grads = [grad_hook(n, g) for n, g in zip(names, grads)]

    gen = torch.Generator().manual_seed(seed)
    picks = []
    if names:
        i = 0
        while len(picks) < n_samples:
            j = i % len(names)
            picks.append((j, int(torch.randint(tensors[j].numel(), (1,), generator=gen))))
            i += 1

    report = GradReport(module=module, max_rel_err=0.0, n_checked=0)
    with torch.no_grad():
        for j, k in picks:
            flat = tensors[j].view(-1)
            orig = flat[k].item()
            flat[k] = orig + eps
            fp = loss_fn().item()
            flat[k] = orig - eps
            fm = loss_fn().item()
            flat[k] = orig
            num = (fp - fm) / (2 * eps)
            ana = grads[j].reshape(-1)[k].item()
            label = f"{names[j]}[{k}]"
            if not (torch.isfinite(torch.tensor([num, ana])).all()):
                report.failures.append(f"{label}: non-finite (analytic {ana}, numeric {num})")
                report.max_rel_err = float("inf")
                continue
            e = rel_err(ana, num, floor)
            report.n_checked += 1
            if e > report.max_rel_err:
                report.max_rel_err, report.worst = e, label
            if e > tol:
                report.failures.append(f"{label}: analytic {ana:.6g} vs numeric {num:.6g} (rel {e:.2e})")
    return report


def _weights(shape, gen):
    return torch.randn(shape, generator=gen, dtype=torch.float64)


def _params(module: torch.nn.Module, prefix: str = ""):
    return {prefix + n: p for n, p in module.named_parameters()}


def _randomize(module, gen, scale=0.3):
    with torch.no_grad():
        for p in module.parameters():
            p.copy_(scale * torch.randn(p.shape, generator=gen, dtype=p.dtype))


def freq_fusion_case(seed=0, C=4, H=8, W=8):
    gen = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    m = FreqFusion(C).double()
    _randomize(m, gen)
    fd = _weights((1, C, H, W), gen)
    fr = _weights((1, C, H, W), gen)
    wr, wi = _weights((1, C, H, W), gen), _weights((1, C, H, W), gen)

    def loss():
        s = m(fd, fr)
        return ((s.real * wr).sum() + (s.imag * wi).sum()) / (H * W)

    tensors = {**_params(m, "freq."), "input.depth": fd, "input.rgb": fr}
    return loss, tensors


def spatial_fusion_case(seed=0, C=4, H=8, W=8):
    gen = torch.Generator().manual_seed(seed)
    m = SpatialFusion(C, blocks=2, window=4, heads=2).double()
    _randomize(m, gen)
    s = dft2(_weights((1, C, H, W), gen))
    fd = _weights((1, C, H, W), gen)
    w = _weights((1, C, H, W), gen)
    real, imag = s.real.clone(), s.imag.clone()

    def loss():
        return (m(ComplexSpectrum(real, imag), fd) * w).mean()

    return loss, {**_params(m, "spatial."), "input.spec_real": real, "input.depth": fd}


def depth_head_case(seed=0, C=4, H=8, W=12, downsample=4):
    gen = torch.Generator().manual_seed(seed)
    m = DepthHead(C, downsample).double()
    _randomize(m, gen)
    f = _weights((1, C, H, W), gen)
    w = _weights((1, 1, H * downsample, W * downsample), gen)

    def loss():
        return (m(f) * w).mean()

    return loss, {**_params(m, "head."), "input.features": f}


def network_case(seed=0, H=32, W=48):
    gen = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    m = S2ML(S2MLConfig(channels=8, pairs=2, blocks_per_pair=1, window=4, heads=2)).double()
    rgb = torch.rand((1, 3, H, W), generator=gen, dtype=torch.float64)
    raw = 0.5 + 9.5 * torch.rand((1, 1, H, W), generator=gen, dtype=torch.float64)
    raw[..., 8:16, 10:24] = 0
    gt = 0.5 + 9.5 * torch.rand((1, 1, H, W), generator=gen, dtype=torch.float64)

    def loss():
        return total_loss(m(rgb, raw), gt)

    return loss, _params(m)


def objective_case(seed=0, H=8, W=8):
    gen = torch.Generator().manual_seed(seed)
    gt = 0.5 + torch.rand((1, 1, H, W), generator=gen, dtype=torch.float64)
    gt[..., :2, :3] = 0
    pred = gt + 0.3 * torch.randn((1, 1, H, W), generator=gen, dtype=torch.float64)

    def loss():
        return total_loss(pred, gt)

    return loss, {"input.pred": pred}


CASES = {
    "freq_fusion": freq_fusion_case,
    "spatial_fusion": spatial_fusion_case,
    "depth_head": depth_head_case,
    "network": network_case,
    "objective": objective_case,
}


def gradcheck(modules=MODULES, eps: float = 1e-6, tol: float = 1e-3, n_samples: int = 24,
              seed: int = 0) -> dict[str, GradReport]:
    out = {}
    for name in modules:
        loss_fn, tensors = CASES[name](seed)
        # sample parameters per tensor group: network has many tensors, so scale up
        n = max(n_samples, min(len(tensors), 4 * n_samples)) if name == "network" else n_samples
        out[name] = check_gradients(loss_fn, tensors, n, eps, tol, seed, module=name)
    return out
