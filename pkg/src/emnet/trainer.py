"""Meta-epoch training loop: mask, train and merge once per training matrix."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from emnet.matdist import SampleDistribution, generate_training_set, training_set_size
from emnet.netcore import (
    Architecture,
    ModelState,
    TrainBatch,
    mask_apply,
    merge,
    new_model,
    sgd_step,
)
from emnet.seeds import derive_seed, rng_for

CONDITIONS = ("control", "shuffled", "subsampled")


@dataclass
class TrainConfig:
    n: int
    arch: tuple[int, ...] = (1,)
    epochs: int = 1
    meta_epochs: int = 1
    condition: str = "shuffled"
    seed: int = 0
    d_size: int | None = None
    k: int | None = None
    batch_size: int | None = None
    lr: float = 0.1
    diag_free: bool = True

    def __post_init__(self):
        self.arch = Architecture.parse(self.n, self.arch).copies
        if self.d_size is None:
            self.d_size = training_set_size(self.n)
        if self.k is None:
            self.k = 8 * self.n
        if self.batch_size is None:
            self.batch_size = max(1, self.k // 4)
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}, got {self.condition!r}")
        if self.epochs < 1 or self.meta_epochs < 1:
            raise ValueError("epochs and meta_epochs must be >= 1")
        if self.d_size < 1 or self.k < 1 or self.batch_size < 1:
            raise ValueError("d_size, k and batch_size must be >= 1")
        if self.k % self.batch_size:
            raise ValueError(f"batch_size {self.batch_size} must divide k={self.k}")

    @property
    def architecture(self) -> Architecture:
        return Architecture(self.n, self.arch)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["arch"] = list(self.arch)
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SessionRecord:
    meta_epoch: int
    matrix_index: int
    matrix_norm: int
    mean_loss: float
    wall_time_s: float


@dataclass
class TrainLog:
    config: TrainConfig
    records: list[SessionRecord] = field(default_factory=list)
    model: ModelState | None = None

    def meta_epoch_losses(self) -> list[float]:
        """Mean session loss per meta-epoch."""
        out = []
        for i in range(self.config.meta_epochs):
            losses = [r.mean_loss for r in self.records if r.meta_epoch == i]
            out.append(float(np.mean(losses)))
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["meta_epoch", "matrix_index", "matrix_norm", "mean_loss", "wall_time_s"])
            for r in self.records:
                w.writerow([r.meta_epoch, r.matrix_index, r.matrix_norm, repr(r.mean_loss),
                            f"{r.wall_time_s:.6f}"])


def session(model: ModelState, A, k: int, batch_size: int, epochs: int, lr: float,
            rng: np.random.Generator) -> float:
    """Mask the model by ``A``, train on ``k`` fresh inputs for ``epochs`` passes, merge back.

    Returns the mean pre-update loss over all SGD steps.
    """
    if k % batch_size:
        raise ValueError(f"batch_size {batch_size} must divide k={k}")
    batch = TrainBatch.from_matrix(A, rng.random((k, model.n)))
    snapshot = mask_apply(model, A)
    losses = []
    try:
        for _ in range(epochs):
            order = rng.permutation(k)
            for start in range(0, k, batch_size):
                losses.append(sgd_step(model, A, batch[order[start:start + batch_size]], lr))
    finally:
        merge(model, snapshot)
    return float(np.mean(losses))


def meta_epoch_schedule(config: TrainConfig) -> Iterator[SampleDistribution]:
    """Yield the matrix sequence visited in each meta-epoch, per the condition."""
    dist = generate_training_set(config.n, config.d_size, config.diag_free,
                                 rng=rng_for(config.seed, "dist"),
                                 seed=derive_seed(config.seed, "dist"))
    for i in range(config.meta_epochs):
        if config.condition == "subsampled":
            dist = generate_training_set(config.n, config.d_size, config.diag_free,
                                         rng=rng_for(config.seed, "subsample", i),
                                         seed=derive_seed(config.seed, "subsample", i))
        if config.condition == "shuffled":
            dist = dist.permuted(rng_for(config.seed, "shuffle", i))
        yield dist


def train(config: TrainConfig, model: ModelState | None = None) -> tuple[ModelState, TrainLog]:
    if model is None:
        model = new_model(config.architecture, rng_for(config.seed, "init"))
    log = TrainLog(config)
    for i, dist in enumerate(meta_epoch_schedule(config)):
        for j, A in enumerate(dist):
            t0 = time.perf_counter()
            loss = session(model, A, config.k, config.batch_size, config.epochs, config.lr,
                           rng_for(config.seed, "session", i, j))
            log.records.append(SessionRecord(i, j, int(round(A.norm)), loss,
                                             time.perf_counter() - t0))
    log.model = model
    return model, log
