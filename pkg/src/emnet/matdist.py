"""Training and test matrix distributions.

Training data are binary symmetric matrices, stratified by their L1 norm
(elementwise sum) so that each norm appears in proportion to how many
matrices carry it. Test data are unsymmetric matrices, either binary or
continuous, at a given density.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np


class InvalidNormError(ValueError):
    pass


@dataclass
class MaskMatrix:
    entries: np.ndarray
    binary: bool = False

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError(f"mask must be square, got shape {self.entries.shape}")
        if np.any(self.entries < 0):
            raise ValueError("mask entries must be nonnegative")
        if self.binary and not np.all((self.entries == 0) | (self.entries == 1)):
            raise ValueError("binary mask has entries outside {0, 1}")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def norm(self) -> float:
        return float(self.entries.sum())

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class NormLikelihood:
    n: int
    diag_free: bool
    counts: dict[int, int]
    total: int

    @property
    def max_norm(self) -> int:
        return max(self.counts)

    def p(self, x: int) -> float:
        # int / int is correctly rounded even when both are huge
        return self.counts.get(x, 0) / self.total

    def probabilities(self) -> dict[int, float]:
        return {x: c / self.total for x, c in self.counts.items()}


@dataclass
class SampleDistribution:
    n: int
    matrices: list[MaskMatrix]
    target_size: int
    seed: int | None = None
    diag_free: bool = True

    def __len__(self) -> int:
        return len(self.matrices)

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, i):
        return self.matrices[i]

    def norm_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for m in self.matrices:
            x = int(round(m.norm))
            hist[x] = hist.get(x, 0) + 1
        return dict(sorted(hist.items()))

    def permuted(self, rng: np.random.Generator) -> "SampleDistribution":
        order = rng.permutation(len(self.matrices))
        return SampleDistribution(self.n, [self.matrices[i] for i in order],
                                  self.target_size, self.seed, self.diag_free)

    def to_json(self, path) -> None:
        payload = {
            "n": self.n,
            "seed": self.seed,
            "diag_free": self.diag_free,
            "matrices": [m.entries.astype(int).ravel().tolist() for m in self.matrices],
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def from_json(cls, path) -> "SampleDistribution":
        payload = json.loads(Path(path).read_text())
        n = int(payload["n"])
        mats = []
        for flat in payload["matrices"]:
            if len(flat) != n * n:
                raise ValueError(f"matrix has {len(flat)} entries, expected {n * n}")
            mats.append(MaskMatrix(np.asarray(flat, dtype=float).reshape(n, n), binary=True))
        return cls(n, mats, len(mats), payload.get("seed"), bool(payload.get("diag_free", True)))


def _pair_count(n: int) -> int:
    return n * (n - 1) // 2


@lru_cache(maxsize=64)
def _counts(n: int, diag_free: bool) -> tuple[tuple[int, int], ...]:
    pairs = _pair_count(n)
    pair_poly = [math.comb(pairs, a) for a in range(pairs + 1)]
    diag_poly = [math.comb(n, b) for b in range(n + 1)] if diag_free else [1]
    counts: dict[int, int] = {}
    for a, ca in enumerate(pair_poly):
        for b, cb in enumerate(diag_poly):
            x = 2 * a + b
            counts[x] = counts.get(x, 0) + ca * cb
    return tuple(sorted(counts.items()))


def norm_likelihood(n: int, diag_free: bool = True) -> NormLikelihood:
    """Exact count of binary symmetric n x n matrices per elementwise sum.

    Each off-diagonal pair contributes 2 to the sum, each free diagonal bit 1,
    so the counts are the coefficients of (1 + t^2)^(n(n-1)/2) (1 + t)^n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = dict(_counts(n, diag_free))
    free = _pair_count(n) + (n if diag_free else 0)
    return NormLikelihood(n, diag_free, counts, 2 ** free)


@lru_cache(maxsize=4096)
def _splits(n: int, x: int, diag_free: bool) -> tuple[tuple[tuple[int, int], ...], np.ndarray]:
    """(off-diagonal pairs, diagonal bits) splits of ``x`` and their probabilities."""
    pairs = _pair_count(n)
    n_diag = n if diag_free else 0
    splits, weights = [], []
    for a in range(min(x // 2, pairs) + 1):
        b = x - 2 * a
        if 0 <= b <= n_diag:
            splits.append((a, b))
            weights.append(math.comb(pairs, a) * math.comb(n_diag, b))
    total = sum(weights)
    probs = np.array([w / total for w in weights])
    return tuple(splits), probs / probs.sum() if splits else probs


def sample_matrix_with_norm(n: int, x: int, diag_free: bool, rng: np.random.Generator) -> MaskMatrix:
    """Uniform draw from the binary symmetric matrices whose entries sum to ``x``."""
    splits, probs = _splits(n, x, diag_free)
    if not splits:
        raise InvalidNormError(f"no {n}x{n} binary symmetric matrix has sum {x} (diag_free={diag_free})")
    a, b = splits[rng.choice(len(splits), p=probs)] if len(splits) > 1 else splits[0]
    pairs = _pair_count(n)

    out = np.zeros((n, n))
    if a:
        iu, ju = np.triu_indices(n, k=1)
        pick = rng.choice(pairs, size=a, replace=False)
        out[iu[pick], ju[pick]] = 1.0
        out[ju[pick], iu[pick]] = 1.0
    if b:
        d = rng.choice(n, size=b, replace=False)
        out[d, d] = 1.0
    return MaskMatrix(out, binary=True)


def training_set_size(n: int) -> int:
    """|d| = 36 n^1.3, rounded half-up."""
    return int(math.floor(36.0 * n ** 1.3 + 0.5))


def allocate_norms(lik: NormLikelihood, target_size: int) -> dict[int, int]:
    """Number of matrices to draw per norm so that the total is exactly ``target_size``."""
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    probs = lik.probabilities()
    alloc = {x: int(math.floor(p * target_size + 0.5)) for x, p in probs.items()}
    # top-up / trim order: most likely norms first, ties broken by smaller norm
    ranked = sorted(probs, key=lambda x: (-probs[x], x))
    diff = target_size - sum(alloc.values())
    i = 0
    while diff > 0:
        alloc[ranked[i % len(ranked)]] += 1
        diff -= 1
        i += 1
    i = 0
    while diff < 0:
        x = ranked[i % len(ranked)]
        if alloc[x] > 0:
            alloc[x] -= 1
            diff += 1
        i += 1
    return {x: c for x, c in sorted(alloc.items()) if c > 0}


def generate_training_set(n: int, target_size: int | None = None, diag_free: bool = True,
                          rng: np.random.Generator | None = None,
                          seed: int | None = None) -> SampleDistribution:
    """Draw ``target_size`` binary symmetric matrices stratified by L1 norm.

    Matrices come out grouped by norm in ascending order. Norms whose rounded
    allocation is zero are dropped.
    """
    if target_size is None:
        target_size = training_set_size(n)
    if rng is None:
        rng = np.random.default_rng(seed)
    alloc = allocate_norms(norm_likelihood(n, diag_free), target_size)
    matrices = [sample_matrix_with_norm(n, x, diag_free, rng)
                for x, c in alloc.items() for _ in range(c)]
    return SampleDistribution(n, matrices, target_size, seed, diag_free)


def generate_test_matrix(n: int, sparsity: float, continuous: bool, symmetric: bool,
                         rng: np.random.Generator) -> MaskMatrix:
    """Each entry is nonzero with probability ``sparsity`` (the fraction of nonzeros).

    Nonzero entries are 1, or uniform on (0, 1] when ``continuous``.
    """
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity must be in [0, 1], got {sparsity}")
    on = rng.random((n, n)) < sparsity
    if continuous:
        # 1 - U[0,1) lies in (0, 1]
        vals = 1.0 - rng.random((n, n))
    else:
        vals = np.ones((n, n))
    out = np.where(on, vals, 0.0)
    if symmetric:
        upper = np.triu(out)
        out = upper + np.triu(upper, k=1).T
    return MaskMatrix(out, binary=not continuous)


def write_likelihood_csv(lik: NormLikelihood, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["norm", "count", "probability"])
        for x, c in sorted(lik.counts.items()):
            w.writerow([x, c, repr(c / lik.total)])
