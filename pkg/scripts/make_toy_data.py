"""Write the two-mode planar toy mixture to a sample file (.csv or binary)."""

from __future__ import annotations

import argparse

from sgn import dataset_io, toy


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--separation", type=float, default=2.0)
    ap.add_argument("--sd", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    mix = toy.ToyMixture(args.separation, args.sd, args.n, args.seed)
    dataset_io.write_samples(mix.sample(), args.out)
    print(f"wrote {args.n} points to {args.out}")


if __name__ == "__main__":
    main()
