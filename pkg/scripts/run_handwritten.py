"""Train TMC (or ETMC) on Handwritten and print accuracy, AUROC and uncertainty behaviour.

Example: python scripts/run_handwritten.py --seeds 0 1 2 --activation relu --noise-views 3 4 5
"""
import argparse
import time

import numpy as np

from tmvc.data import NoiseSpec, inject_noise, load_manifest, split, standardize
from tmvc.evaluation import accuracy, auroc, predict_records, subjective_confusion
from tmvc.handwritten import ensure_handwritten
from tmvc.model import TmcModel, TrainConfig, train


def run(seed, args):
    ds = load_manifest(ensure_handwritten(args.data))
    tr, te = split(ds, 0.2, seed)
    tr, te, _ = standardize(tr, te)
    model = TmcModel.build(tr.view_widths, ds.k, etmc=args.etmc, activation=args.activation, seed=seed)
    start = time.perf_counter()
    train(model, tr, TrainConfig(epochs=args.epochs, lr=args.lr, seed=seed))
    secs = time.perf_counter() - start
    rec = predict_records(model, te)
    noisy = predict_records(model, inject_noise(te, NoiseSpec(args.sigma, tuple(args.noise_views), seed)))
    tau = np.quantile(rec.u, 0.2)
    sc = subjective_confusion(rec)
    print(f"seed={seed} {'ETMC' if args.etmc else 'TMC'} act={args.activation} train {secs:.0f}s | "
          f"acc {accuracy(rec):.4f} auroc {auroc(rec):.4f} | "
          f"u clean {rec.u.mean():.4f} noisy {noisy.u.mean():.4f} ratio {noisy.u.mean() / rec.u.mean():.2f} | "
          f"acc@u<=q20 {accuracy(rec.subset(rec.u <= tau)):.4f} | "
          f"err certain {sc.certain_error_rate} overall {sc.overall_error_rate:.4f} | "
          f"noisy acc {accuracy(noisy):.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="data/handwritten")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--activation", choices=["relu", "tanh"], default="tanh")
    ap.add_argument("--etmc", action="store_true")
    ap.add_argument("--sigma", type=float, default=10.0)
    ap.add_argument("--noise-views", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    for seed in args.seeds:
        run(seed, args)


if __name__ == "__main__":
    main()
