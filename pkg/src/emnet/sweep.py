"""Parameter sweep over (n, condition, epochs, meta-epochs, replicate) cells."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from emnet.evaluator import EvalConfig, certificate, eval_error, sparsity_sweep
from emnet.seeds import derive_seed
from emnet.trainer import CONDITIONS, TrainConfig, train

log = logging.getLogger(__name__)

CONVERGED_THRESHOLD = 1e-6
DESK_SIZES = (5, 10, 20, 40)
FULL_SIZES = (5, 10, 20, 40, 100)

RESULT_FIELDS = ["n", "condition", "epochs", "meta_epochs", "replicate", "seed", "error",
                 "max_deviation", "wall_time_s", "converged", "status", "message"]
SUMMARY_FIELDS = ["n", "condition", "best_error", "best_epochs", "best_meta_epochs",
                  "cells_converged", "cells_total"]


@dataclass
class SweepConfig:
    sizes: tuple[int, ...] = DESK_SIZES
    epochs: tuple[int, ...] = (1, 2, 3)
    meta_epochs: tuple[int, ...] = (1, 2, 4, 8, 16)
    conditions: tuple[str, ...] = CONDITIONS
    seed: int = 0
    replicates: int = 1
    out_dir: str = "sweep_out"
    arch: tuple[int, ...] = (1,)
    workers: int = 1
    n_test_matrices: int = 100

    def __post_init__(self):
        for name in ("sizes", "epochs", "meta_epochs", "conditions", "arch"):
            setattr(self, name, tuple(getattr(self, name)))
            if name != "arch" and not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if any(n < 1 for n in self.sizes):
            raise ValueError("sizes must be >= 1")
        bad = [c for c in self.conditions if c not in CONDITIONS]
        if bad:
            raise ValueError(f"unknown conditions {bad}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def cells(self) -> list["Cell"]:
        return [Cell(n, cond, e, m, r, cell_seed(self.seed, n, r))
                for n, cond, e, m, r in itertools.product(self.sizes, self.conditions, self.epochs,
                                                          self.meta_epochs, range(self.replicates))]


@dataclass(frozen=True)
class Cell:
    n: int
    condition: str
    epochs: int
    meta_epochs: int
    replicate: int
    seed: int

    @property
    def name(self) -> str:
        return f"n{self.n}_{self.condition}_e{self.epochs}_m{self.meta_epochs}_r{self.replicate}"


@dataclass
class SweepResult:
    n: int
    condition: str
    epochs: int
    meta_epochs: int
    replicate: int
    seed: int
    error: float = float("nan")
    max_deviation: float = float("nan")
    wall_time_s: float = 0.0
    converged: bool = False
    status: str = "ok"
    message: str = ""
    sparsity_rows: list[dict] = field(default_factory=list, repr=False)

    def row(self) -> dict:
        out = asdict(self)
        out.pop("sparsity_rows")
        out["error"] = repr(self.error)
        out["max_deviation"] = repr(self.max_deviation)
        out["wall_time_s"] = f"{self.wall_time_s:.3f}"
        out["converged"] = int(self.converged)
        return out


def cell_seed(base_seed: int, n: int, replicate: int) -> int:
    """Shared by every condition and (epochs, meta-epochs) pair at the same n and replicate,
    so control and shuffled start from the same data and initial weights."""
    return derive_seed(base_seed, "cell", n, replicate) % (2 ** 63)


def eval_config_for(cell: Cell, n_test_matrices: int = 100) -> EvalConfig:
    return EvalConfig(n_test_matrices=n_test_matrices, seed=cell.seed)


def run_cell(cell: Cell, arch=(1,), out_dir: Path | None = None, n_test_matrices: int = 100) -> SweepResult:
    """Train, evaluate and certify one cell. Writes per-cell files when ``out_dir`` is given."""
    res = SweepResult(cell.n, cell.condition, cell.epochs, cell.meta_epochs, cell.replicate, cell.seed)
    t0 = time.perf_counter()
    try:
        cfg = TrainConfig(n=cell.n, arch=tuple(arch), epochs=cell.epochs, meta_epochs=cell.meta_epochs,
                          condition=cell.condition, seed=cell.seed)
        model, tlog = train(cfg)
        ecfg = eval_config_for(cell, n_test_matrices)
        res.error = eval_error(model, ecfg)
        cert = certificate(model)
        res.max_deviation = cert.max_deviation
        res.converged = bool(res.error < CONVERGED_THRESHOLD)
        report = sparsity_sweep(model, ecfg) if res.converged else None
        if report is not None:
            res.sparsity_rows = [
                {"n": cell.n, "condition": cell.condition, "epochs": cell.epochs,
                 "meta_epochs": cell.meta_epochs, "sparsity": lv.sparsity, "continuous": 0,
                 "mean_error": lv.mean_error, "std_error": lv.std_error, "metric": report.metric,
                 "seed": cell.seed}
                for lv in report.levels]
        if out_dir is not None:
            cdir = Path(out_dir) / "cells" / cell.name
            cdir.mkdir(parents=True, exist_ok=True)
            model.save(cdir / "model.json")
            tlog.to_csv(cdir / "trainlog.csv")
            cert.to_json(cdir / "certificate.json")
            (cdir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    except Exception as exc:  # cell isolation: record and continue
        res.status = "failed"
        res.message = f"{type(exc).__name__}: {exc}"
        log.debug("cell %s failed\n%s", cell.name, traceback.format_exc())
    res.wall_time_s = time.perf_counter() - t0
    return res


def summarize(results: list[SweepResult]) -> list[dict]:
    """Minimum error per (n, condition) with its (epochs, meta-epochs)."""
    groups: dict[tuple[int, str], list[SweepResult]] = {}
    for r in results:
        groups.setdefault((r.n, r.condition), []).append(r)
    rows = []
    for (n, cond), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], CONDITIONS.index(kv[0][1]))):
        ok = [r for r in rs if r.status == "ok"]
        best = min(ok, key=lambda r: (r.error, r.epochs, r.meta_epochs)) if ok else None
        rows.append({
            "n": n, "condition": cond,
            "best_error": repr(best.error) if best else "nan",
            "best_epochs": best.epochs if best else "",
            "best_meta_epochs": best.meta_epochs if best else "",
            "cells_converged": sum(r.converged for r in ok),
            "cells_total": len(rs),
        })
    return rows


def _write_csv(path: Path, fields: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)


SPARSITY_FIELDS = ["n", "condition", "epochs", "meta_epochs", "sparsity", "continuous",
                   "mean_error", "std_error", "metric", "seed"]


def run_sweep(cfg: SweepConfig, progress=None) -> list[SweepResult]:
    """Run every cell, then write results.csv, summary.csv and sparsity.csv under ``cfg.out_dir``.

    Rows are appended to results.csv as cells finish; the final file is rewritten in cell order.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_config.json").write_text(json.dumps(asdict(cfg), indent=2))
    cells = cfg.cells()
    results: list[SweepResult] = []

    partial = open(out / "results.csv", "w", newline="")
    writer = csv.DictWriter(partial, fieldnames=RESULT_FIELDS)
    writer.writeheader()

    def record(res: SweepResult):
        results.append(res)
        writer.writerow(res.row())
        partial.flush()
        if progress:
            progress(res, len(results), len(cells))

    try:
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                futs = [pool.submit(run_cell, c, cfg.arch, out, cfg.n_test_matrices) for c in cells]
                for f in futs:
                    record(f.result())
        else:
            for c in cells:
                record(run_cell(c, cfg.arch, out, cfg.n_test_matrices))
    finally:
        partial.close()

    _write_csv(out / "results.csv", RESULT_FIELDS, [r.row() for r in results])
    _write_csv(out / "summary.csv", SUMMARY_FIELDS, summarize(results))
    _write_csv(out / "sparsity.csv", SPARSITY_FIELDS,
               [row | {"mean_error": repr(row["mean_error"]), "std_error": repr(row["std_error"])}
                for r in results for row in r.sparsity_rows])
    return results


def load_results(out_dir) -> list[SweepResult]:
    out = Path(out_dir)
    path = out / "results.csv"
    if not path.exists():
        return []
    results = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            results.append(SweepResult(
                int(row["n"]), row["condition"], int(row["epochs"]), int(row["meta_epochs"]),
                int(row["replicate"]), int(row["seed"]), float(row["error"]),
                float(row["max_deviation"]), float(row["wall_time_s"]), row["converged"] == "1",
                row["status"], row["message"]))
    sp = out / "sparsity.csv"
    if sp.exists():
        index = {(r.n, r.condition, r.epochs, r.meta_epochs, r.seed): r for r in results}
        with open(sp, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (int(row["n"]), row["condition"], int(row["epochs"]), int(row["meta_epochs"]),
                       int(row["seed"]))
                if key in index:
                    index[key].sparsity_rows.append({
                        **row, "n": key[0], "epochs": key[2], "meta_epochs": key[3], "seed": key[4],
                        "sparsity": float(row["sparsity"]), "mean_error": float(row["mean_error"]),
                        "std_error": float(row["std_error"])})
    return results
