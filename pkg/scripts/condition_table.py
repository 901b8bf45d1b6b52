"""Run the (epochs x meta-epochs) sweep and print the best error per size and condition.

    python3 scripts/condition_table.py --sizes 5 10 --out runs/table
"""

import argparse
import logging

from emnet.sweep import DESK_SIZES, SweepConfig, run_sweep, summarize
from emnet.trainer import CONDITIONS


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=list(DESK_SIZES))
    ap.add_argument("--conditions", nargs="+", choices=CONDITIONS, default=list(CONDITIONS))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/table")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = SweepConfig(sizes=tuple(args.sizes), conditions=tuple(args.conditions), seed=args.seed,
                      workers=args.workers, out_dir=args.out)
    def progress(r, done, total):
        logging.info("[%d/%d] n=%d %s (%d,%d) error=%.3g", done, total, r.n, r.condition, r.epochs,
                     r.meta_epochs, r.error)

    rows = summarize(run_sweep(cfg, progress=progress))
    table = {(r["n"], r["condition"]): r for r in rows}
    print(f"{'n':>4} " + " ".join(f"{c:>24}" for c in args.conditions))
    for n in args.sizes:
        cells = []
        for c in args.conditions:
            r = table[(n, c)]
            cells.append(f"{float(r['best_error']):.3e} ({r['best_epochs']},{r['best_meta_epochs']})")
        print(f"{n:>4} " + " ".join(f"{s:>24}" for s in cells))


if __name__ == "__main__":
    main()
