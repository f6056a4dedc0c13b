"""Command-line entry point: ``sgn {train,generate,interpolate,mll,kl-estimate}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as run_config
from . import dataset_io, latent_source, mlp, parzen_eval, trainer
from .kl_objective import estimate_kl
from .latent_source import LatentSpec

log = logging.getLogger("sgn")


class CliError(Exception):
    pass


def _load_images(path: str) -> np.ndarray:
    if not path:
        raise CliError("dataset not found: no path given")
    try:
        return dataset_io.read_samples(path)
    except FileNotFoundError as e:
        raise CliError(f"dataset not found: {path}") from e


def _latent_spec(cfg: run_config.RunConfig) -> LatentSpec:
    if cfg.latent.kind == "uniform":
        return latent_source.uniform_spec(cfg.latent.dim)
    # GM means are drawn from the latent seed so the mixture is reproducible
    rng = latent_source.make_rng(cfg.seeds.latent + 0x6D)
    return latent_source.make_gm_spec(cfg.latent.dim, cfg.latent.components, cfg.latent.sigma, rng)


def _split(cfg: run_config.RunConfig, images: np.ndarray):
    if cfg.data.limit:
        images = images[:cfg.data.limit]
    if cfg.data.validation_size <= 0:
        return images, images[:0]
    train_idx, val_idx = dataset_io.split_validation(len(images), cfg.data.validation_size,
                                                     cfg.data.split_seed)
    return images[train_idx], images[val_idx]


def _checkpoint(path: str):
    try:
        return mlp.load_checkpoint(path), mlp.load_checkpoint_metadata(path)
    except FileNotFoundError as e:
        raise CliError(f"checkpoint not found: {path}") from e


def _spec_from_meta(meta: dict) -> LatentSpec:
    if "latent" not in meta:
        raise CliError("checkpoint carries no latent source description")
    return LatentSpec.from_dict(meta["latent"])


def cmd_train(args) -> int:
    try:
        cfg = run_config.load(args.config, args.set)
        cfg.validate()
    except (OSError, run_config.ConfigError) as e:
        raise CliError(str(e)) from e
    if args.dry_run:
        sys.stdout.write(cfg.dump())
        return 0

    images = _load_images(cfg.data.train)
    train_x, val_x = _split(cfg, images)
    test_x = _load_images(cfg.data.test) if cfg.eval.at_end else None
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.dump())

    spec = _latent_spec(cfg)
    net = mlp.init(cfg.layer_dims(train_x.shape[1]), cfg.network.activation_gain,
                   latent_source.make_rng(cfg.seeds.init), cfg.network.output_activation,
                   cfg.network.output_scale)
    if cfg.network.output_bias == "data-mean":
        mlp.set_output_offset(net, train_x.mean(axis=0))
    tcfg = cfg.train_config()
    trainer.check_overhead_ratio(tcfg.N, tcfg.B)

    csv_path = out / "convergence.csv"
    csv_path.unlink(missing_ok=True)
    grid_rng = latent_source.make_rng(cfg.seeds.latent + 0x67)
    grid_z = latent_source.sample(spec, cfg.output.grid_rows * cfg.output.grid_cols, grid_rng)

    images_ok = train_x.shape[1] == dataset_io.IMAGE_SIDE ** 2

    def on_epoch(stat, params):
        if not cfg.output.log_wall_time:
            # keeps the log byte-identical across repeated runs
            stat = dataclasses.replace(stat, wall_time=0.0)
        dataset_io.append_convergence_row(stat, csv_path)
        if images_ok and cfg.output.grid_every and stat.epoch % cfg.output.grid_every == 0:
            dataset_io.export_grid(mlp.generate(params, grid_z), cfg.output.grid_rows,
                                   cfg.output.grid_cols, out / f"samples_epoch{stat.epoch:04d}.pgm")

    meta = {"latent": spec.to_dict(), "seeds": cfg.to_dict()["seeds"], "config": cfg.to_dict()}
    hooks = trainer.Hooks(on_epoch=on_epoch, checkpoint_path=str(out / "checkpoint.npz"),
                          checkpoint_every=cfg.output.checkpoint_every, checkpoint_metadata=meta)
    try:
        result = trainer.train(tcfg, train_x, net, spec, hooks=hooks)
    except trainer.TrainingDiverged as e:
        raise CliError(f"training diverged: {e}") from e
    if images_ok:
        dataset_io.export_grid(mlp.generate(result.params, grid_z), cfg.output.grid_rows,
                               cfg.output.grid_cols, out / "samples_final.pgm")

    if cfg.eval.at_end:
        if len(val_x) == 0:
            raise CliError("evaluation needs data.validation_size > 0")
        gen = trainer.generate(result.params, spec, cfg.eval.n_generated,
                               latent_source.make_rng(cfg.seeds.latent + 1))
        report = parzen_eval.evaluate_mll(gen, val_x, test_x[:cfg.eval.n_test], cfg.eval.grid())
        report.seeds = cfg.to_dict()["seeds"]
        (out / "mll.json").write_text(report.to_json())
        print(f"MLL {report.mll:.2f} at sigma {report.sigma_star:.4g}")
    print(f"wrote {out}")
    return 0


def cmd_generate(args) -> int:
    net, meta = _checkpoint(args.checkpoint)
    spec = _spec_from_meta(meta)
    samples = trainer.generate(net, spec, args.n, latent_source.make_rng(args.seed))
    if args.out:
        dataset_io.write_samples(samples, args.out)
    if args.grid:
        cols = args.cols or int(np.ceil(np.sqrt(max(args.n, 1))))
        rows = args.rows or -(-args.n // cols)
        if rows * cols < args.n:
            raise CliError(f"a {rows}x{cols} grid cannot hold {args.n} samples")
        padded = np.vstack([samples, np.zeros((rows * cols - args.n, samples.shape[1]))])
        dataset_io.export_grid(padded, rows, cols, args.grid)
    if not (args.out or args.grid):
        raise CliError("nothing to write: give --out and/or --grid")
    print(f"generated {args.n} samples")
    return 0


def cmd_interpolate(args) -> int:
    net, meta = _checkpoint(args.checkpoint)
    spec = _spec_from_meta(meta)
    if spec.kind != "uniform":
        raise CliError("corners undefined for GM source")
    rng = latent_source.make_rng(args.seed)
    rows = []
    for _ in range(args.rows):
        a = latent_source.random_corner(spec.dim, rng)
        b = 1.0 - a   # opposite corner: the walk runs along a major diagonal
        rows.append(mlp.generate(net, latent_source.interpolation_path(a, b, args.steps)))
    images = np.vstack(rows)
    dataset_io.export_grid(images, args.rows, args.steps, args.out)
    if args.samples:
        dataset_io.write_samples(images, args.samples)
    print(f"wrote {args.rows}x{args.steps} interpolation grid to {args.out}")
    return 0


def _read_any(path: str) -> np.ndarray:
    try:
        return dataset_io.read_samples(path)
    except FileNotFoundError as e:
        raise CliError(f"dataset not found: {path}") from e


def cmd_mll(args) -> int:
    seeds: dict = {"split": args.split_seed}
    if args.checkpoint:
        net, meta = _checkpoint(args.checkpoint)
        generated = trainer.generate(net, _spec_from_meta(meta), args.n_generated,
                                     latent_source.make_rng(args.seed))
        seeds.update(meta.get("seeds", {}), generate=args.seed)
    else:
        generated = _read_any(args.samples)
    test = _read_any(args.test)[:args.n_test]
    if args.validation:
        validation = _read_any(args.validation)
    else:
        train = _read_any(args.train)
        _, val_idx = dataset_io.split_validation(len(train), args.validation_size, args.split_seed)
        validation = train[val_idx]
    grid = np.logspace(np.log10(args.sigma_min), np.log10(args.sigma_max), args.sigma_count)
    report = parzen_eval.evaluate_mll(generated[:args.n_generated], validation, test, grid)
    report.seeds = seeds
    if args.json:
        Path(args.json).write_text(report.to_json())
    if args.csv:
        path = Path(args.csv)
        header = not path.exists() or path.stat().st_size == 0
        with open(path, "a") as f:
            f.write(report.to_csv_row(header))
    print(f"MLL {report.mll:.4f} sigma* {report.sigma_star:.6g} "
          f"(centers {report.n_centers}, test {report.n_eval}, validation {report.n_validation})")
    return 0


def cmd_kl_estimate(args) -> int:
    p = _read_any(args.p)
    q = _read_any(args.q)
    value = estimate_kl(p, q, k=args.k)
    print(json.dumps({"kl": value, "k": args.k, "n_p": len(p), "n_q": len(q)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sgn", description="kNN-KL trained sample generator")
    ap.add_argument("-v", "--verbose", action="store_true", help="log every epoch")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a generator from a YAML run config")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config value (repeatable)")
    p.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="draw samples from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("-n", "--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="raw dump: .csv for text, anything else for binary")
    p.add_argument("--grid", help="PGM image grid path")
    p.add_argument("--rows", type=int, default=0, help="grid rows (default: fit n)")
    p.add_argument("--cols", type=int, default=0, help="grid columns (default: about sqrt(n))")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("interpolate", help="walk from a random hypercube corner to the opposite one")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--rows", type=int, default=1, help="number of independent corner walks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="PGM image path")
    p.add_argument("--samples", help="also dump the raw rows")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("mll", help="Parzen mean log-likelihood of generated samples")
    gen = p.add_mutually_exclusive_group(required=True)
    gen.add_argument("--samples", help="sample dump to use as Parzen centers")
    gen.add_argument("--checkpoint", help="draw the centers from this generator")
    p.add_argument("--seed", type=int, default=0, help="latent seed when drawing from --checkpoint")
    p.add_argument("--test", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--validation", help="explicit validation rows")
    src.add_argument("--train", help="training file; validation is split from it")
    p.add_argument("--validation-size", type=int, default=5000)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--n-generated", type=int, default=10000)
    p.add_argument("--n-test", type=int, default=10000)
    p.add_argument("--sigma-min", type=float, default=0.01)
    p.add_argument("--sigma-max", type=float, default=1.0)
    p.add_argument("--sigma-count", type=int, default=30)
    p.add_argument("--json")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_mll)

    p = sub.add_parser("kl-estimate", help="kNN estimate of KL(P || Q) from two sample files")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("-k", type=int, default=1)
    p.set_defaults(func=cmd_kl_estimate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except (CliError, run_config.ConfigError, dataset_io.IdxFormatError,
            dataset_io.SampleFormatError, mlp.CheckpointError, ValueError) as e:
        print(f"sgn: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
