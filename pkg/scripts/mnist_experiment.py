"""Train on MNIST from a run config, then write sample grids, an interpolation
figure (uniform source only) and the Parzen MLL report.

    python scripts/mnist_experiment.py configs/mnist.yaml --set train.epochs=100
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from sgn import cli, config, mlp


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    args = ap.parse_args()

    cfg = config.load(args.config, args.set + ["eval.at_end=true"])
    out = Path(cfg.output.dir)
    overrides = [x for s in args.set + ["eval.at_end=true"] for x in ("--set", s)]
    if cli.main(["-v", "train", "--config", args.config, *overrides]) != 0:
        raise SystemExit(1)

    ckpt = str(out / "checkpoint.npz")
    cli.main(["generate", "--checkpoint", ckpt, "-n", "100", "--seed", "7",
              "--out", str(out / "samples_100.bin"), "--grid", str(out / "samples_grid.pgm")])
    latent = mlp.load_checkpoint_metadata(ckpt)["latent"]
    if latent["kind"] == "uniform":
        cli.main(["interpolate", "--checkpoint", ckpt, "--steps", "10", "--rows", "8",
                  "--out", str(out / "interpolation.pgm")])
    report = json.loads((out / "mll.json").read_text())
    print(f"MLL {report['mll']:.2f}  sigma* {report['sigma_star']:.4g}  -> {out}")


if __name__ == "__main__":
    main()
