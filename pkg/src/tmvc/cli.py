"""Command-line entry point: ``tmvc {train,evaluate,fuse,noise-sweep}``.

Config files are flat JSON; any key may be overridden by the matching flag.
Keys (defaults in ``RunConfig``): manifest, out, seed, epochs, lr, batch_size,
weight_decay, anneal_epochs, etmc, hidden, activation, test_fraction, sigma,
noise_views.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .data import DataError, NoiseSpec, Standardizer, inject_noise, load_manifest, split, standardize
from .evaluation import evaluate, noise_sweep, subjective_confusion, threshold_curve, uncertainty_density
from .fusion import TotalConflict, combine_all
from .model import NumericalFailure, TmcModel, TrainConfig, train
from .opinion import InvalidOpinion, SubjectiveOpinion

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
CHECKPOINT_VERSION = 1
THRESHOLD_GRID = [i / 20 for i in range(21)]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    manifest: str | None = None
    out: str | None = None
    seed: int | None = None
    epochs: int = 100
    lr: float = 3e-3
    batch_size: int = 100
    weight_decay: float = 1e-4
    anneal_epochs: int = 50
    etmc: bool = False
    hidden: list[int] | None = None
    activation: str = "relu"
    test_fraction: float = 0.2
    sigma: float = 0.0
    noise_views: list[int] = field(default_factory=lambda: [0])

    def validate(self, need_manifest: bool = True) -> None:
        if self.seed is None:
            raise ConfigError("seed: required (set it in the config file or pass --seed)")
        if need_manifest:
            if not self.manifest:
                raise ConfigError("manifest: required")
            if not Path(self.manifest).is_file():
                raise ConfigError(f"manifest: file not found: {self.manifest}")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"activation: expected 'relu' or 'tanh', got {self.activation!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction: must lie in (0, 1), got {self.test_fraction}")
        if self.sigma < 0:
            raise ConfigError(f"sigma: must be >= 0, got {self.sigma}")
        if self.hidden is not None and (not self.hidden or min(self.hidden) < 1):
            raise ConfigError(f"hidden: positive layer widths required, got {self.hidden}")
        try:
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.lr, self.weight_decay, self.anneal_epochs, self.seed)


def _coerce(name: str, value: Any) -> Any:
    kinds = {"seed": int, "epochs": int, "batch_size": int, "anneal_epochs": int,
             "lr": float, "weight_decay": float, "test_fraction": float, "sigma": float}
    try:
        if name in kinds and value is not None:
            if isinstance(value, bool):
                raise TypeError
            return kinds[name](value)
        if name == "etmc" and not isinstance(value, bool):
            raise TypeError
        if name in ("hidden", "noise_views") and value is not None:
            return [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: invalid value {value!r}") from None
    return value


def load_config(path: str | None, overrides: dict[str, Any]) -> RunConfig:
    values: dict[str, Any] = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config: file not found: {p}")
        try:
            values = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {p} is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError("config: top level must be a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"config: unknown keys {unknown}")
        if values.get("manifest") and not Path(values["manifest"]).is_absolute():
            values["manifest"] = str(p.parent / values["manifest"])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})


# ---- deterministic output ---------------------------------------------------

def _round(obj: Any) -> Any:
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.12g}") if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    return obj


def dumps(obj: Any) -> str:
    """JSON with every float rounded to 12 significant digits."""
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def write_csv(path: Path, header: str, rows) -> None:
    lines = [f"# {header}"]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _out_dir(out: str | None, seed: int) -> Path:
    d = Path(out) if out else Path("runs") / f"{time.strftime('%Y%m%d-%H%M%S')}-seed{seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---- data shared by train and evaluate -------------------------------------

def _prepare(manifest: str, test_fraction: float, split_seed: int, stats: Standardizer | None = None):
    ds = load_manifest(manifest)
    train_ds, test_ds = split(ds, test_fraction, split_seed)
    if stats is None:
        train_ds, test_ds, stats = standardize(train_ds, test_ds)
    else:
        if len(stats.means) != ds.m or [len(m) for m in stats.means] != ds.view_widths:
            raise DataError("manifest view widths do not match the checkpoint's standardizer")
        train_ds, test_ds = stats.apply(train_ds), stats.apply(test_ds)
    return ds, train_ds, test_ds, stats


def _load_checkpoint(path: str | None):
    if not path:
        raise ConfigError("checkpoint: required")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"checkpoint: file not found: {p}")
    try:
        ckpt = json.loads(p.read_text())
        if ckpt.get("format_version") != CHECKPOINT_VERSION:
            raise ConfigError(f"checkpoint: unsupported format_version {ckpt.get('format_version')!r}")
        model = TmcModel.from_dict(ckpt["model"])
        stats = Standardizer.from_dict(ckpt["standardizer"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"checkpoint: malformed {p}: {exc}") from exc
    return ckpt, model, stats


def _check_compatible(model: TmcModel, ds) -> None:
    if ds.k != model.k:
        raise DataError(f"manifest has K={ds.k} but checkpoint was trained with K={model.k}")
    if ds.view_widths != model.view_widths:
        raise DataError(f"manifest view widths {ds.view_widths} != checkpoint {model.view_widths}")


def _eval_inputs(args):
    ckpt, model, stats = _load_checkpoint(args.checkpoint)
    run = ckpt["config"]
    manifest = args.manifest or run["manifest"]
    if not Path(manifest).is_file():
        raise ConfigError(f"manifest: file not found: {manifest}")
    ds = load_manifest(manifest)
    _check_compatible(model, ds)
    _, _, test_ds, _ = _prepare(manifest, run["test_fraction"], ckpt["split_seed"], stats)
    seed = args.seed if args.seed is not None else run["seed"]
    views = _coerce("noise_views", args.noise_views) if args.noise_views is not None else run["noise_views"]
    return model, test_ds, seed, views, run


# ---- commands ---------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = load_config(args.config, {
        "manifest": args.manifest, "out": args.out, "seed": args.seed,
        "epochs": args.epochs, "lr": args.lr, "etmc": True if args.etmc else None,
    })
    cfg.validate()
    ds, train_ds, test_ds, stats = _prepare(cfg.manifest, cfg.test_fraction, cfg.seed)
    model = TmcModel.build(train_ds.view_widths, ds.k, etmc=cfg.etmc, hidden=cfg.hidden,
                           activation=cfg.activation, seed=cfg.seed)
    report = train(model, train_ds, cfg.train_config())
    out = _out_dir(cfg.out, cfg.seed)
    checkpoint = {
        "format_version": CHECKPOINT_VERSION,
        # the output directory is left out so reruns elsewhere stay byte-identical
        "config": {k: v for k, v in asdict(cfg).items() if k != "out"},
        "split_seed": cfg.seed,
        "standardizer": stats.to_dict(),
        "model": model.to_dict(),
    }
    # full precision so a reloaded model reproduces the held-out report exactly
    (out / "checkpoint.json").write_text(json.dumps(checkpoint, sort_keys=True) + "\n")
    write_csv(out / "losses.csv", "epoch,loss", enumerate(report.epoch_losses))
    ev = evaluate(model, test_ds)
    ev.extra.update({"train_accuracy": report.train_accuracy, "n_train": train_ds.n,
                     "etmc": cfg.etmc, "seed": cfg.seed})
    (out / "report.json").write_text(dumps(ev.to_dict()))
    print(f"held-out accuracy {ev.accuracy:.4f} (n={test_ds.n}); outputs in {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model, test_ds, seed, views, run = _eval_inputs(args)
    sigma = _single_sigma(args.sigma) if args.sigma is not None else float(run["sigma"])
    if sigma > 0:
        test_ds = inject_noise(test_ds, NoiseSpec(sigma, tuple(views), seed))
    ev = evaluate(model, test_ds)
    sc = subjective_confusion(ev.records)
    ev.extra.update({"sigma": sigma, "noise_views": list(views) if sigma > 0 else [], "noise_seed": seed,
                     "certain_error_rate": sc.certain_error_rate, "overall_error_rate": sc.overall_error_rate})
    out = _out_dir(args.out, seed)
    (out / "report.json").write_text(dumps(ev.to_dict()))
    write_csv(out / "threshold_curve.csv", "tau,coverage,accuracy (empty accuracy = nothing retained)",
              threshold_curve(ev.records, THRESHOLD_GRID))
    counts, edges = uncertainty_density(ev.records, 20)
    write_csv(out / "density.csv", "bin_lo,bin_hi,count", zip(edges[:-1], edges[1:], counts))
    k = model.k
    write_csv(out / "confusion.csv",
              "true_class," + ",".join(f"pred_{j}" for j in range(k)) + ",uncertain (row proportions)",
              ([i, *row] for i, row in enumerate(sc.matrix)))
    print(f"accuracy {ev.accuracy:.4f} mean u {float(ev.records.u.mean()):.4f}; outputs in {out}")
    return EXIT_OK


def cmd_noise_sweep(args) -> int:
    model, test_ds, seed, views, _ = _eval_inputs(args)
    sigmas = _sigma_list(args.sigma) if args.sigma is not None else [0.0, 1.0, 10.0, 100.0]
    rows = noise_sweep(model, test_ds, sigmas, views, seed)
    out = _out_dir(args.out, seed)
    write_csv(out / "sweep.csv", "sigma,accuracy,mean_uncertainty", rows)
    (out / "sweep.json").write_text(dumps({
        "noise_views": list(views), "seed": seed,
        "rows": [{"sigma": s, "accuracy": a, "mean_uncertainty": u} for s, a, u in rows],
    }))
    for s, a, u in rows:
        print(f"sigma={s:g} accuracy={a:.4f} mean_u={u:.4f}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    src = sys.stdin.read() if args.opinions == "-" else _read_input(args.opinions)
    try:
        raw = json.loads(src)
        if not isinstance(raw, list) or not raw:
            raise ConfigError("opinions: expected a non-empty JSON list of {belief, uncertainty}")
        ops = [SubjectiveOpinion.from_json(o) for o in raw]
    except json.JSONDecodeError as exc:
        raise ConfigError(f"opinions: invalid JSON: {exc}") from exc
    except (InvalidOpinion, TypeError) as exc:
        raise ConfigError(f"opinions: {exc}") from exc
    try:
        fused = combine_all(ops)
    except ValueError as exc:
        raise ConfigError(f"opinions: {exc}") from exc
    text = dumps(fused.to_json())
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _read_input(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"opinions: file not found: {p}")
    return p.read_text()


def _sigma_list(text: str) -> list[float]:
    try:
        vals = [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"sigma: expected comma-separated numbers, got {text!r}") from None
    if not vals or min(vals) < 0:
        raise ConfigError(f"sigma: values must be >= 0, got {text!r}")
    return vals


def _single_sigma(text) -> float:
    vals = _sigma_list(text)
    if len(vals) != 1:
        raise ConfigError("sigma: evaluate takes a single value; use noise-sweep for several")
    return vals[0]


def _views_arg(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated view indices, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tmvc", description="Trusted multi-view classification")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model and report held-out metrics")
    t.add_argument("--config")
    t.add_argument("--manifest")
    t.add_argument("--out")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--etmc", action="store_true", help="add the concatenated pseudo-view")
    t.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("evaluate", cmd_evaluate, "evaluate a checkpoint on its held-out split"),
        ("noise-sweep", cmd_noise_sweep, "accuracy and uncertainty across noise levels"),
    ):
        e = sub.add_parser(name, help=help_)
        e.add_argument("--checkpoint", required=True)
        e.add_argument("--manifest")
        e.add_argument("--out")
        e.add_argument("--seed", type=int, help="noise seed (defaults to the training seed)")
        e.add_argument("--sigma", help="noise std; comma-separated list for noise-sweep")
        e.add_argument("--noise-views", type=_views_arg, help="comma-separated view indices")
        e.set_defaults(func=func)

    f = sub.add_parser("fuse", help="fuse a JSON list of opinions")
    f.add_argument("opinions", help="path to JSON list, or - for stdin")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fuse)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TotalConflict as exc:
        print(f"numeric failure: total conflict: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
