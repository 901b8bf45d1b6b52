"""Command-line entry point: ``emnet <subcommand>`` or ``python -m emnet <subcommand>``.

Every subcommand accepts ``--config file.json``; keys are the long flag names
with dashes replaced by underscores. Flags given on the command line override
the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from emnet.evaluator import EvalConfig, certificate, eval_error, sparsity_sweep, weight_report
from emnet.matdist import (
    MaskMatrix,
    generate_training_set,
    norm_likelihood,
    training_set_size,
    write_likelihood_csv,
)
from emnet.netcore import Architecture, ModelState, second_order_forward
from emnet.plots import emit_plots
from emnet.sweep import DESK_SIZES, FULL_SIZES, SweepConfig, load_results, run_sweep, summarize
from emnet.trainer import CONDITIONS, TrainConfig, train

log = logging.getLogger("emnet")

DEFAULTS = {
    "sample-dist": {"size": None, "diag_free": True, "seed": 0, "out": "."},
    "train": {"arch": "1", "condition": "shuffled", "epochs": 1, "meta_epochs": 1, "seed": 0,
              "d_size": None, "k": None, "batch_size": None, "lr": 0.1, "diag_free": True,
              "out": "train_out"},
    "eval": {"n_test": 100, "vectors": None, "sparsity": 0.5, "seed": 0, "sweep": False,
             "binary": False, "out": None, "condition": "", "epochs": "", "meta_epochs": ""},
    "certificate": {"seed": 0, "out": None, "weights": None},
    "sweep": {"sizes": None, "epochs": [1, 2, 3], "meta_epochs": [1, 2, 4, 8, 16],
              "conditions": list(CONDITIONS), "replicates": 1, "workers": 1, "arch": "1",
              "full": False, "seed": 0, "out": "sweep_out", "n_test": 100, "plots": True},
    "second-order-demo": {"n": None, "matrix": None, "x": None, "seed": 0},
    "plot": {"seed": 0, "out": None},
}


class CLIError(Exception):
    pass


def _common(p: argparse.ArgumentParser):
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=S, help="master RNG seed")
    p.add_argument("--config", default=S, help="JSON file with option values")
    p.add_argument("--out", default=S, help="output path")
    p.add_argument("-v", "--verbose", action="store_true", default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="emnet", description="Ensemble mask network experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-dist", help="emit a training distribution and its norm likelihood")
    _common(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--size", type=int, default=S, help="|d| (default 36 n^1.3)")
    p.add_argument("--diag-free", action=argparse.BooleanOptionalAction, default=S)

    p = sub.add_parser("train", help="run one training configuration")
    _common(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--arch", default=S, help='copies per hidden layer, e.g. "1", "2,3", "0"')
    p.add_argument("--condition", choices=CONDITIONS, default=S)
    p.add_argument("--epochs", type=int, default=S)
    p.add_argument("--meta-epochs", type=int, default=S)
    p.add_argument("--d-size", type=int, default=S)
    p.add_argument("--k", type=int, default=S)
    p.add_argument("--batch-size", type=int, default=S)
    p.add_argument("--lr", type=float, default=S)
    p.add_argument("--diag-free", action=argparse.BooleanOptionalAction, default=S)

    p = sub.add_parser("eval", help="evaluate a saved model")
    _common(p)
    p.add_argument("--model", default=S)
    p.add_argument("--n-test", type=int, default=S)
    p.add_argument("--vectors", type=int, default=S)
    p.add_argument("--sparsity", type=float, default=S)
    p.add_argument("--binary", action="store_true", default=S)
    p.add_argument("--sweep", action="store_true", default=S, help="also run the sparsity sweep")
    p.add_argument("--condition", default=S, help="label written to the sweep CSV")
    p.add_argument("--epochs", default=S, help="label written to the sweep CSV")
    p.add_argument("--meta-epochs", default=S, help="label written to the sweep CSV")

    p = sub.add_parser("certificate", help="check the exactness condition on saved weights")
    _common(p)
    p.add_argument("--model", default=S)
    p.add_argument("--weights", default=S, help="also write a per-row weight CSV here")

    p = sub.add_parser("sweep", help="run the parameter sweep")
    _common(p)
    p.add_argument("--sizes", type=int, nargs="+", default=S)
    p.add_argument("--epochs", type=int, nargs="+", default=S)
    p.add_argument("--meta-epochs", type=int, nargs="+", default=S)
    p.add_argument("--conditions", nargs="+", choices=CONDITIONS, default=S)
    p.add_argument("--replicates", type=int, default=S)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--arch", default=S)
    p.add_argument("--n-test", type=int, default=S)
    p.add_argument("--full", action="store_true", default=S, help="include n=100 in the default sizes")
    p.add_argument("--plots", action=argparse.BooleanOptionalAction, default=S)

    p = sub.add_parser("second-order-demo", help="compare the two-mask forward with A^2 x")
    _common(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--matrix", default=S, help="JSON file holding an n x n binary matrix")
    p.add_argument("--x", default=S, help="comma-separated input vector (default e_1)")

    p = sub.add_parser("plot", help="emit sparsity charts from a sweep directory")
    _common(p)
    p.add_argument("--results", default=S)
    return parser


def resolve(command: str, ns: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS[command])
    given = vars(ns)
    if "config" in given:
        cfg = json.loads(Path(given["config"]).read_text())
        unknown = set(cfg) - set(opts) - {"n", "model", "results", "verbose"}
        if unknown:
            raise CLIError(f"--config: unknown keys {sorted(unknown)}")
        opts.update(cfg)
    opts.update({k: v for k, v in given.items() if k not in ("command", "config")})
    return opts


def _need(opts: dict, key: str):
    if opts.get(key) is None:
        raise CLIError(f"missing required option --{key.replace('_', '-')}")
    return opts[key]


def cmd_sample_dist(o: dict) -> int:
    n = _need(o, "n")
    size = o["size"] or training_set_size(n)
    dist = generate_training_set(n, size, o["diag_free"], seed=o["seed"])
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    dist.to_json(out / "distribution.json")
    write_likelihood_csv(norm_likelihood(n, o["diag_free"]), out / "likelihood.csv")
    print(f"{len(dist)} matrices, n={n}; norm allocation {dist.norm_histogram()}")
    print(f"wrote {out / 'distribution.json'} and {out / 'likelihood.csv'}")
    return 0


def cmd_train(o: dict) -> int:
    n = _need(o, "n")
    cfg = TrainConfig(n=n, arch=Architecture.parse(n, o["arch"]).copies, epochs=o["epochs"],
                      meta_epochs=o["meta_epochs"],
                      condition=o["condition"], seed=o["seed"], d_size=o["d_size"], k=o["k"],
                      batch_size=o["batch_size"], lr=o["lr"], diag_free=o["diag_free"])
    model, tlog = train(cfg)
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    tlog.to_csv(out / "trainlog.csv")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    err = eval_error(model, EvalConfig(seed=o["seed"]))
    losses = tlog.meta_epoch_losses()
    print(f"n={cfg.n} arch={cfg.architecture.label} {cfg.condition} ({cfg.epochs},{cfg.meta_epochs}) "
          f"|d|={cfg.d_size} k={cfg.k} batch={cfg.batch_size} lr={cfg.lr}")
    print(f"mean session loss: first meta-epoch {losses[0]:.3e}, last {losses[-1]:.3e}")
    print(f"eval error (continuous, 0.5 sparsity): {err:.3e}")
    print(f"wrote {out / 'model.json'}, {out / 'trainlog.csv'}")
    return 0


def cmd_eval(o: dict) -> int:
    model = ModelState.load(_need(o, "model"))
    cfg = EvalConfig(n_test_matrices=o["n_test"], vectors_per_matrix=o["vectors"], sparsity=o["sparsity"],
                     continuous=not o["binary"], seed=o["seed"])
    err = eval_error(model, cfg)
    kind = "binary" if o["binary"] else "continuous"
    print(f"eval error ({kind}, sparsity {cfg.sparsity}): {err:.6e}")
    if o["sweep"]:
        rep = sparsity_sweep(model, cfg)
        for lv in rep.levels:
            print(f"  sparsity {lv.sparsity:.1f}: mean {lv.mean_error:.3e}  std {lv.std_error:.3e}")
        if o["out"]:
            rep.to_csv(o["out"], o["condition"], o["epochs"], o["meta_epochs"])
            print(f"wrote {o['out']}")
    return 0


def cmd_certificate(o: dict) -> int:
    model = ModelState.load(_need(o, "model"))
    rep = certificate(model)
    print(f"max deviation from exactness: {rep.max_deviation:.6e}")
    if rep.row_constants is not None:
        print("row constants: " + " ".join(f"{c:.6g}" for c in rep.row_constants))
        print(f"max within-row std: {rep.constant_spread:.3e}")
    if o["out"]:
        rep.to_json(o["out"])
        print(f"wrote {o['out']}")
    if o["weights"]:
        weight_report(model).to_csv(o["weights"])
    return 0


def cmd_sweep(o: dict) -> int:
    sizes = o["sizes"] or (FULL_SIZES if o["full"] else DESK_SIZES)
    cfg = SweepConfig(sizes=sizes, epochs=o["epochs"], meta_epochs=o["meta_epochs"], conditions=o["conditions"],
                      seed=o["seed"], replicates=o["replicates"], out_dir=o["out"],
                      arch=Architecture.parse(1, o["arch"]).copies,
                      workers=o["workers"], n_test_matrices=o["n_test"])

    def progress(res, done, total):
        status = f"{res.error:.3e}" if res.status == "ok" else res.message
        print(f"[{done}/{total}] n={res.n} {res.condition} ({res.epochs},{res.meta_epochs}) "
              f"rep={res.replicate}: {status}  {res.wall_time_s:.1f}s", flush=True)

    results = run_sweep(cfg, progress)
    print("\nn    condition    best_error  (epochs,meta)  converged/total")
    for row in summarize(results):
        print(f"{row['n']:<4} {row['condition']:<12} {float(row['best_error']):.3e}  "
              f"({row['best_epochs']},{row['best_meta_epochs']})          "
              f"{row['cells_converged']}/{row['cells_total']}")
    if o["plots"] and any(r.sparsity_rows for r in results):
        emit_plots(results, Path(cfg.out_dir) / "plots")
    failed = [r for r in results if r.status != "ok"]
    if failed:
        print(f"{len(failed)} cells failed; see results.csv", file=sys.stderr)
    return 0


def _load_matrix(path) -> np.ndarray:
    payload = json.loads(Path(path).read_text())
    if isinstance(payload, dict):
        if "matrix" in payload:
            payload = payload["matrix"]
        elif "matrices" in payload:
            n = int(payload["n"])
            payload = np.asarray(payload["matrices"][0], dtype=float).reshape(n, n)
    return np.asarray(payload, dtype=float)


def cmd_second_order(o: dict) -> int:
    if o["matrix"]:
        A = _load_matrix(o["matrix"])
    else:
        rng = np.random.default_rng(o["seed"])
        n = o["n"] or 3
        A = np.triu((rng.random((n, n)) < 0.5).astype(float), k=1)
        A = A + A.T
    MaskMatrix(A, binary=True)
    n = A.shape[0]
    if o["n"] is not None and o["matrix"] and o["n"] != n:
        raise CLIError(f"--n {o['n']} does not match the {n}x{n} matrix in {o['matrix']}")
    x = np.array([float(t) for t in o["x"].split(",")]) if o["x"] else np.eye(n)[0]
    ones = np.ones((n, n))
    ok = True
    for loops, expected in ((False, A @ A @ x), (True, A @ A @ x + A @ x)):
        y = second_order_forward(ones, ones, A, x, self_loops=loops)
        match = bool(np.array_equal(y, expected))
        ok &= match
        label = "(A^2+A)x" if loops else "A^2x"
        print(f"self_loops={str(loops).lower():5s} output={y.tolist()} {label}={expected.tolist()} "
              f"{label} match = {str(match).lower()}")
    return 0 if ok else 1


def cmd_plot(o: dict) -> int:
    results_dir = Path(_need(o, "results"))
    results = load_results(results_dir)
    written = emit_plots(results, o["out"] or results_dir / "plots")
    for p in written:
        print(f"wrote {p}")
    return 0


COMMANDS = {
    "sample-dist": cmd_sample_dist,
    "train": cmd_train,
    "eval": cmd_eval,
    "certificate": cmd_certificate,
    "sweep": cmd_sweep,
    "second-order-demo": cmd_second_order,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    command = ns.command
    try:
        opts = resolve(command, ns)
        logging.basicConfig(level=logging.DEBUG if opts.get("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[command](opts)
    except Exception as exc:
        print(f"emnet {command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
