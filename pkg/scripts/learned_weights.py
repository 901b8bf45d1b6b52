"""Train small networks of several architectures and print their learned weight structure.

    python3 scripts/learned_weights.py --n 5 --archs 0 1 1,1
"""

import argparse

from emnet.evaluator import certificate, eval_error, weight_report
from emnet.trainer import TrainConfig, train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--archs", nargs="+", default=["0", "1", "1,1"])
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--meta-epochs", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for arch in args.archs:
        cfg = TrainConfig(n=args.n, arch=arch, epochs=args.epochs, meta_epochs=args.meta_epochs, seed=args.seed)
        model, _ = train(cfg)
        print(f"== arch {cfg.architecture.label}: eval error {eval_error(model):.3e}, "
              f"certificate max deviation {certificate(model).max_deviation:.3e}")
        print(weight_report(model).to_text())
        print()


if __name__ == "__main__":
    main()
