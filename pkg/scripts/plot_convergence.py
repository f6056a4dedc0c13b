"""Plot mean D^i per epoch from one or more convergence.csv files (needs matplotlib)."""

from __future__ import annotations

import argparse

from sgn import dataset_io


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", nargs="+")
    ap.add_argument("--out", default="convergence.png")
    args = ap.parse_args()

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.csv:
        stats = dataset_io.read_convergence_csv(path)
        ax.plot([s.epoch for s in stats], [s.mean_d_i for s in stats], label=path)
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean D^i")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
