"""Linear feedforward network with a per-input masked first layer.

The network computes ``y = W_{m+1} ... W_2 (tile(A) * W_1) x`` with no
activations or biases. Hidden layer ``i`` holds ``c_i`` copies of each of the
``n`` nodes; copy ``r`` of node ``k`` sits at row ``r*n + k``, so the mask row
used for hidden unit ``p`` is ``A[p % n]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DimensionError(ValueError):
    pass


class NonBinaryMaskError(ValueError):
    pass


class StaleSnapshotError(RuntimeError):
    pass


class DivergenceError(FloatingPointError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Architecture:
    n: int
    copies: tuple[int, ...] = (1,)

    def __post_init__(self):
        object.__setattr__(self, "copies", tuple(int(c) for c in self.copies))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if any(c < 1 for c in self.copies):
            raise ValueError(f"copy counts must be >= 1, got {self.copies}")

    @classmethod
    def parse(cls, n: int, spec: str | Sequence[int]) -> "Architecture":
        """Accepts ``"0"``, ``"1"``, ``"2,3"``, ``"(2,3)"`` or a sequence of ints."""
        if isinstance(spec, int):
            spec = (spec,)
        try:
            if isinstance(spec, str):
                body = spec.strip().strip("()[]").replace(" ", "")
                copies = tuple(int(t) for t in body.split(",") if t)
            else:
                copies = tuple(int(t) for t in spec)
        except ValueError:
            raise ValueError(f"invalid architecture {spec!r}; expected copy counts like '1' or '2,3'") from None
        if copies == (0,):
            copies = ()
        return cls(n, copies)

    @property
    def label(self) -> str:
        return "(" + ",".join(str(c) for c in self.copies) + ")" if self.copies else "(0)"

    @property
    def shapes(self) -> list[tuple[int, int]]:
        n = self.n
        if not self.copies:
            return [(n, n)]
        widths = [c * n for c in self.copies]
        shapes = [(widths[0], n)]
        for prev, cur in zip(widths, widths[1:]):
            shapes.append((cur, prev))
        shapes.append((n, widths[-1]))
        return shapes

    @property
    def first_width(self) -> int:
        return self.shapes[0][0]


@dataclass
class ModelState:
    arch: Architecture
    layers: list[np.ndarray]

    def __post_init__(self):
        self.layers = [np.asarray(w, dtype=float) for w in self.layers]
        expected = self.arch.shapes
        got = [w.shape for w in self.layers]
        if got != expected:
            raise DimensionError(f"layer shapes {got} do not match architecture {expected}")

    @property
    def n(self) -> int:
        return self.arch.n

    @property
    def copy_map(self) -> np.ndarray:
        return np.arange(self.arch.first_width) % self.arch.n

    def copy(self) -> "ModelState":
        return ModelState(self.arch, [w.copy() for w in self.layers])

    def readout(self) -> np.ndarray:
        """Composed unmasked layers ``R = W_{m+1} ... W_2`` (identity for arch (0))."""
        r = np.eye(self.n)
        for w in reversed(self.layers[1:]):
            r = r @ w
        return r

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "arch": list(self.arch.copies),
            "layers": [{"rows": w.shape[0], "cols": w.shape[1], "data": w.ravel().tolist()}
                       for w in self.layers],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelState":
        try:
            arch = Architecture(int(payload["n"]), tuple(payload["arch"]))
            layers = []
            for spec in payload["layers"]:
                rows, cols, data = int(spec["rows"]), int(spec["cols"]), spec["data"]
                if len(data) != rows * cols:
                    raise ModelFormatError(
                        f"layer data has {len(data)} values, expected {rows}x{cols}={rows * cols}")
                layers.append(np.asarray(data, dtype=float).reshape(rows, cols))
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed model file: {exc!r}") from exc
        try:
            return cls(arch, layers)
        except DimensionError as exc:
            raise ModelFormatError(str(exc)) from exc

    def save(self, path) -> None:
        # json writes floats via repr, which round-trips float64 exactly
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ModelState":
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(payload)


@dataclass
class MaskSnapshot:
    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(int(r), int(c)): float(v) for r, c, v in zip(self.rows, self.cols, self.values)}


@dataclass
class TrainBatch:
    inputs: np.ndarray
    targets: np.ndarray

    @classmethod
    def from_matrix(cls, A, inputs) -> "TrainBatch":
        x = np.atleast_2d(np.asarray(inputs, dtype=float))
        return cls(x, x @ np.asarray(A, dtype=float).T)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def __getitem__(self, idx) -> "TrainBatch":
        return TrainBatch(self.inputs[idx], self.targets[idx])


def new_model(arch: Architecture, rng: np.random.Generator | None = None,
              init_scale: str = "fan_in") -> ModelState:
    """Weights i.i.d. uniform on [-s, s] with s = 1/sqrt(fan_in)."""
    if rng is None:
        rng = np.random.default_rng()
    if init_scale != "fan_in":
        raise ValueError(f"unknown init scale rule {init_scale!r}")
    layers = []
    for rows, cols in arch.shapes:
        s = 1.0 / np.sqrt(cols)
        layers.append(rng.uniform(-s, s, size=(rows, cols)))
    return ModelState(arch, layers)


def _mask_array(A, n: int) -> np.ndarray:
    a = np.asarray(A, dtype=float)
    if a.shape != (n, n):
        raise DimensionError(f"mask shape {a.shape} does not match n={n}")
    return a


def tile_mask(A, arch: Architecture) -> np.ndarray:
    a = _mask_array(A, arch.n)
    reps = arch.copies[0] if arch.copies else 1
    return np.tile(a, (reps, 1))


def forward(model: ModelState, A, x) -> np.ndarray:
    """Network output for input ``x`` (an n-vector, or a (B, n) array of row inputs)."""
    xs = np.asarray(x, dtype=float)
    if xs.shape[-1] != model.n:
        raise DimensionError(f"input length {xs.shape[-1]} does not match n={model.n}")
    w1 = tile_mask(A, model.arch) * model.layers[0]
    h = xs @ w1.T
    for w in model.layers[1:]:
        h = h @ w.T
    return h


def _binary(A, n: int) -> np.ndarray:
    a = _mask_array(A, n)
    if not np.all((a == 0) | (a == 1)):
        raise NonBinaryMaskError("training masks must have entries in {0, 1}")
    return a


def mask_apply(model: ModelState, A) -> MaskSnapshot:
    """Zero W_1 wherever the tiled mask is zero, returning what was overwritten."""
    tiled = tile_mask(_binary(A, model.n), model.arch)
    w1 = model.layers[0]
    rows, cols = np.nonzero(tiled == 0)
    snap = MaskSnapshot(w1.shape, rows, cols, w1[rows, cols].copy())
    w1[rows, cols] = 0.0
    return snap


def merge(model: ModelState, snapshot: MaskSnapshot) -> ModelState:
    w1 = model.layers[0]
    if w1.shape != tuple(snapshot.shape):
        raise StaleSnapshotError(f"snapshot shape {snapshot.shape} does not match W_1 {w1.shape}")
    w1[snapshot.rows, snapshot.cols] = snapshot.values
    return model


def loss_and_grads(model: ModelState, A, batch: TrainBatch) -> tuple[float, list[np.ndarray]]:
    """Per-element MSE averaged over the batch, with gradients for every layer.

    The W_1 gradient already carries the tiled-mask factor.
    """
    mask = tile_mask(A, model.arch)
    x, y = batch.inputs, batch.targets
    bsz, n = x.shape
    acts = [x]
    h = x @ (mask * model.layers[0]).T
    acts.append(h)
    for w in model.layers[1:]:
        h = h @ w.T
        acts.append(h)
    resid = h - y
    loss = float(np.sum(resid * resid)) / (bsz * n)

    grads: list[np.ndarray] = [None] * len(model.layers)  # type: ignore[list-item]
    delta = (2.0 / (bsz * n)) * resid
    for i in range(len(model.layers) - 1, 0, -1):
        grads[i] = delta.T @ acts[i]
        delta = delta @ model.layers[i]
    grads[0] = mask * (delta.T @ acts[0])
    return loss, grads


def sgd_step(model: ModelState, A, batch: TrainBatch, lr: float = 0.1) -> float:
    """One plain SGD update in place; returns the pre-update loss."""
    with np.errstate(over="ignore", invalid="ignore"):
        loss, grads = loss_and_grads(model, A, batch)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss}")
    for w, g in zip(model.layers, grads):
        w -= lr * g
    return loss


def second_order_forward(W_a, W_b, A, x, self_loops: bool = False) -> np.ndarray:
    """Two stacked mask layers: ``(M2 * W_b) (A * W_a) x``.

    ``M2`` is ``A`` itself, or ``A`` with its diagonal switched on when
    ``self_loops`` is set, which adds the first-order term.
    """
    a = np.asarray(A, dtype=float)
    wa = np.asarray(W_a, dtype=float)
    wb = np.asarray(W_b, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or wa.shape != (n, n) or wb.shape != (n, n):
        raise DimensionError(f"shape mismatch: A {a.shape}, W_a {wa.shape}, W_b {wb.shape}")
    xs = np.asarray(x, dtype=float)
    if xs.shape[-1] != n:
        raise DimensionError(f"input length {xs.shape[-1]} does not match n={n}")
    m2 = np.maximum(a, np.eye(n)) if self_loops else a
    return ((m2 * wb) @ ((a * wa) @ xs.T)).T
