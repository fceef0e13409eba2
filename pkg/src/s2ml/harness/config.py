from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from s2ml.errors import ValidationError
from s2ml.network import S2MLConfig


@dataclass
class RunConfig:
    model: S2MLConfig = field(default_factory=S2MLConfig)
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    steps: int = 2000
    batch: int = 4
    seed: int = 0
    data: str = "data/toy"
    out: str = "runs/default"
    train_subset: int | None = None  # use only the first k training samples
    val_every: int = 250
    val_samples: int = 8
    grad_clip: float | None = 1.0
    eval_batch: int = 4

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = S2MLConfig.from_dict(self.model)
        self.betas = tuple(float(b) for b in self.betas)
        if self.steps < 0 or self.batch < 1 or self.eval_batch < 1 or self.val_every < 1:
            raise ValidationError("steps must be >= 0 and batch sizes / val_every positive")
        if not self.lr > 0:
            raise ValidationError("lr must be positive")
        if self.train_subset is not None and self.train_subset < 1:
            raise ValidationError("train_subset must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        opt = d.pop("optimizer", None)
        if opt:
            if opt.get("kind", "adam") != "adam":
                raise ValidationError("only the adam optimizer is supported")
            d.setdefault("lr", opt.get("lr", 1e-3))
            d.setdefault("betas", opt.get("betas", (0.9, 0.999)))
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown run config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))
