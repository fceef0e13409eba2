"""Overfit sanity run: can the default two-pair model memorize a handful of scenes?"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

from s2ml.datagen import make_sample
from s2ml.harness.config import RunConfig
from s2ml.harness.train import evaluate_model, hole_rmse, stack, train
from s2ml.network import S2MLConfig


@dataclass
class OverfitResult:
    rmse: float
    depth_range: float
    hole_rmse_pred: float
    hole_rmse_raw: float
    steps: int
    wall_time: float
    first_loss: float
    last_loss: float

    @property
    def rmse_fraction(self):
        return self.rmse / self.depth_range

    @property
    def hole_improvement(self):
        return 1.0 - self.hole_rmse_pred / self.hole_rmse_raw

    def to_dict(self):
        return {**asdict(self), "rmse_fraction": self.rmse_fraction,
                "hole_improvement": self.hole_improvement}


def overfit_run(n_samples: int = 8, steps: int = 2000, size=(96, 144), seed: int = 0,
                model: S2MLConfig | None = None) -> OverfitResult:
    """Train on ``n_samples`` uncropped scenes and score on the same scenes.

    The depth range is the nominal scene range (d_max - d_min of SceneSpec).
    """
    samples = [make_sample(1000 + i, size=size, crop=None) for i in range(n_samples)]
    cfg = RunConfig(model=model or S2MLConfig(pairs=2), steps=steps, seed=seed, val_every=10**9)
    t0 = time.time()
    res = train(cfg, samples, None, save=False)
    wall = time.time() - t0
    rep, _, pred = evaluate_model(res.model, samples)
    _, raw, gt = stack(samples)
    d_min, d_max = samples[0].meta["scene"]["depth_range"]
    return OverfitResult(
        rmse=rep.rmse, depth_range=d_max - d_min,
        hole_rmse_pred=hole_rmse(pred, raw, gt), hole_rmse_raw=hole_rmse(raw, raw, gt),
        steps=steps, wall_time=wall, first_loss=res.losses[0], last_loss=res.losses[-1],
    )
