"""Held-out error measurement and structural checks on learned weights."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from emnet.matdist import generate_test_matrix
from emnet.netcore import ModelState, forward
from emnet.seeds import rng_for

METRIC = "mse_per_element"
DEFAULT_SPARSITIES = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass
class EvalConfig:
    n_test_matrices: int = 100
    vectors_per_matrix: int | None = None  # None -> 8n
    sparsity: float = 0.5
    sparsities: tuple[float, ...] = DEFAULT_SPARSITIES
    continuous: bool = True
    seed: int = 0

    def __post_init__(self):
        self.sparsities = tuple(float(s) for s in self.sparsities)
        if self.n_test_matrices < 1:
            raise ValueError("n_test_matrices must be >= 1")
        if self.vectors_per_matrix is not None and self.vectors_per_matrix < 1:
            raise ValueError("vectors_per_matrix must be >= 1")
        if not all(0.0 <= s <= 1.0 for s in (self.sparsity, *self.sparsities)):
            raise ValueError("sparsities must lie in [0, 1]")

    def vectors_for(self, n: int) -> int:
        return self.vectors_per_matrix or 8 * n


@dataclass
class SparsityLevel:
    sparsity: float
    mean_error: float
    std_error: float


@dataclass
class EvalReport:
    n: int
    continuous: bool
    levels: list[SparsityLevel]
    seed: int
    metric: str = METRIC
    errors: dict[str, float] = field(default_factory=dict)

    def to_csv(self, path, condition: str = "", epochs: int | str = "", meta_epochs: int | str = "",
               append: bool = False) -> None:
        path = Path(path)
        write_header = not (append and path.exists() and path.stat().st_size > 0)
        with open(path, "a" if append else "w", newline="") as fh:
            w = csv.writer(fh)
            if write_header:
                w.writerow(["n", "condition", "epochs", "meta_epochs", "sparsity", "continuous",
                            "mean_error", "std_error", "metric", "seed"])
            for lv in self.levels:
                w.writerow([self.n, condition, epochs, meta_epochs, lv.sparsity, int(self.continuous),
                            repr(lv.mean_error), repr(lv.std_error), self.metric, self.seed])


@dataclass
class CertificateReport:
    max_deviation: float
    row_constants: list[float] | None = None
    constant_spread: float | None = None

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2))


@dataclass
class WeightReport:
    row_mean: np.ndarray
    row_std: np.ndarray
    readout: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "w1_mean", "w1_std"])
            for i, (m, s) in enumerate(zip(self.row_mean, self.row_std)):
                w.writerow([i, repr(float(m)), repr(float(s))])
            w.writerow([])
            w.writerow(["readout_row"] + [f"p{j}" for j in range(self.readout.shape[1])])
            for i, row in enumerate(self.readout):
                w.writerow([i] + [repr(float(v)) for v in row])

    def to_text(self) -> str:
        lines = ["W1 rows (mean, std):"]
        lines += [f"  {i:3d}  {m: .6e}  {s:.3e}" for i, (m, s) in enumerate(zip(self.row_mean, self.row_std))]
        lines.append(f"R = W_out...W_2, shape {self.readout.shape}:")
        lines += ["  " + " ".join(f"{v: .4e}" for v in row) for row in self.readout]
        return "\n".join(lines)


def matrix_error(model: ModelState, A, X: np.ndarray) -> float:
    """Mean over the rows of ``X`` of ||f(A, x) - A x||^2 / n."""
    a = np.asarray(A, dtype=float)
    resid = forward(model, a, X) - X @ a.T
    return float(np.mean(resid * resid))


def errors_on(model: ModelState, matrices: Iterable, vectors: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([matrix_error(model, A, X) for A, X in zip(matrices, vectors)])


def _test_set(n: int, count: int, n_vec: int, sparsity: float, continuous: bool, rng):
    mats, vecs = [], []
    for _ in range(count):
        mats.append(generate_test_matrix(n, sparsity, continuous, False, rng).entries)
        vecs.append(rng.random((n_vec, n)))
    return mats, vecs


def eval_error(model: ModelState, config: EvalConfig | None = None) -> float:
    """Mean per-element squared error on unsymmetric test matrices at ``config.sparsity``."""
    config = config or EvalConfig()
    n = model.n
    rng = rng_for(config.seed, "eval", int(round(config.sparsity * 1000)), int(config.continuous))
    mats, vecs = _test_set(n, config.n_test_matrices, config.vectors_for(n), config.sparsity,
                           config.continuous, rng)
    return float(np.mean(errors_on(model, mats, vecs)))


def sparsity_sweep(model: ModelState, config: EvalConfig | None = None) -> EvalReport:
    """Error per density level on binary unsymmetric test matrices."""
    config = config or EvalConfig()
    n = model.n
    levels = []
    for s in config.sparsities:
        rng = rng_for(config.seed, "sweep", int(round(s * 1000)))
        mats, vecs = _test_set(n, config.n_test_matrices, config.vectors_for(n), s, False, rng)
        errs = errors_on(model, mats, vecs)
        levels.append(SparsityLevel(s, float(errs.mean()), float(errs.std())))
    return EvalReport(n, False, levels, config.seed)


def transfer_tensor(model: ModelState) -> np.ndarray:
    """``T[i, k, j] = sum over copies p of node k of R[i, p] W_1[p, j]``.

    ``forward(model, A, x)[i] = sum_{k,j} A[k, j] x[j] T[i, k, j]``, so the model
    computes ``A x`` for every mask exactly when ``T[i, k, j] = delta_ik``.
    """
    n = model.n
    w1 = model.layers[0]
    c = w1.shape[0] // n
    r = model.readout()
    return np.einsum("irk,rkj->ikj", r.reshape(n, c, n), w1.reshape(c, n, n))


def certificate(model: ModelState) -> CertificateReport:
    n = model.n
    t = transfer_tensor(model)
    target = np.eye(n)[:, :, None]
    report = CertificateReport(float(np.max(np.abs(t - target))))
    if model.arch.copies == (1,):
        consts = model.layers[0].mean(axis=1)
        report.row_constants = [float(v) for v in consts]
        report.constant_spread = float(np.max(model.layers[0].std(axis=1)))
    return report


def weight_report(model: ModelState) -> WeightReport:
    w1 = model.layers[0]
    return WeightReport(w1.mean(axis=1), w1.std(axis=1), model.readout())
