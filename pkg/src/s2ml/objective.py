"""Masked L1+L2 training loss and depth-completion metrics (RMSE, REL, delta)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch

from s2ml.errors import ValidationError

GAMMA1 = 1.0
GAMMA2 = 1.0
DELTA_THRESHOLDS = (1.25, 1.25**2, 1.25**3)


@dataclass
class MetricReport:
    rmse: float
    rel: float
    d1: float
    d2: float
    d3: float
    n_valid: int

    def to_dict(self) -> dict:
        return asdict(self)

    def check(self):
        ok = (
            self.rmse >= 0
            and self.rel >= 0
            and 0 <= self.d1 <= self.d2 <= self.d3 <= 100
            and self.n_valid >= 1
        )
        if not ok:
            raise ValidationError(f"MetricReport invariants violated: {self}")
        return self


def valid_mask(gt: torch.Tensor) -> torch.Tensor:
    return gt > 0


def _check_pair(pred, gt):
    if pred.shape != gt.shape:
        raise ValidationError(f"pred/gt shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    mask = valid_mask(gt)
    if not mask.any():
        raise ValidationError("ground truth has no valid pixels (P = 0)")
    return mask


def total_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """gamma1*L1 + gamma2*L2 over pixels with gt > 0.

    P counts valid pixels across the whole tensor, so a batch is treated as
    one pool of pixels.
    """
    mask = _check_pair(pred, gt)
    m = mask.to(pred.dtype)
    P = m.sum()
    diff = (pred - gt) * m
    l1 = diff.abs().sum() / P
    l2 = (diff * diff).sum() / P
    return GAMMA1 * l1 + GAMMA2 * l2


def evaluate_metrics(pred: torch.Tensor, gt: torch.Tensor) -> MetricReport:
    """Metrics over valid gt pixels of a single sample, accumulated in float64.

    Non-positive predictions on valid pixels count as delta failures.
    """
    mask = _check_pair(pred, gt)
    p = pred.detach().double()[mask]
    g = gt.detach().double()[mask]
    n = p.numel()
    err = p - g
    rmse = torch.sqrt((err * err).sum() / n).item()
    rel = (err.abs() / g).sum().item() / n
    pos = p > 0
    ratio = torch.where(pos, torch.maximum(p / g, g / torch.where(pos, p, torch.ones_like(p))),
                        torch.full_like(p, float("inf")))
    d = [100.0 * (ratio < t).sum().item() / n for t in DELTA_THRESHOLDS]
    return MetricReport(rmse=rmse, rel=rel, d1=d[0], d2=d[1], d3=d[2], n_valid=n)


def mean_report(reports: list[MetricReport]) -> MetricReport:
    """Per-sample average; order of accumulation does not matter beyond float64 rounding."""
    if not reports:
        raise ValidationError("no reports to average")
    k = len(reports)
    fields = ("rmse", "rel", "d1", "d2", "d3")
    vals = {f: sum(sorted(getattr(r, f) for r in reports)) / k for f in fields}
    return MetricReport(**vals, n_valid=sum(r.n_valid for r in reports))
