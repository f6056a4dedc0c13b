"""Latent source distributions: the unit hypercube and a Gaussian mixture."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIFORM = "uniform"
GAUSSIAN_MIXTURE = "gm"
KINDS = (UNIFORM, GAUSSIAN_MIXTURE)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the same seed always yields the same stream."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class LatentSpec:
    kind: str
    dim: int
    priors: np.ndarray | None = field(default=None, repr=False)
    means: np.ndarray | None = field(default=None, repr=False)
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown latent kind {self.kind!r}; expected one of {KINDS}")
        if self.dim < 1:
            raise ValueError("latent dimension must be >= 1")
        if self.kind == GAUSSIAN_MIXTURE:
            priors = np.asarray(self.priors, dtype=np.float64)
            means = np.asarray(self.means, dtype=np.float64)
            if means.ndim != 2 or means.shape[1] != self.dim:
                raise ValueError(f"means must have shape (C, {self.dim}), got {means.shape}")
            if priors.shape != (means.shape[0],):
                raise ValueError("need exactly one prior per mixture mean")
            if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
                raise ValueError("priors must be nonnegative and sum to 1")
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("sigma must be > 0")
            object.__setattr__(self, "priors", priors)
            object.__setattr__(self, "means", means)
            object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_components(self) -> int:
        return 0 if self.means is None else self.means.shape[0]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": int(self.dim)}
        if self.kind == GAUSSIAN_MIXTURE:
            out["sigma"] = self.sigma
            out["priors"] = self.priors.tolist()
            out["means"] = self.means.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "LatentSpec":
        if d["kind"] == UNIFORM:
            return cls(UNIFORM, int(d["dim"]))
        return cls(GAUSSIAN_MIXTURE, int(d["dim"]), priors=np.array(d["priors"]),
                   means=np.array(d["means"]), sigma=float(d["sigma"]))


def uniform_spec(dim: int) -> LatentSpec:
    return LatentSpec(UNIFORM, dim)


def make_gm_spec(dim: int, n_components: int, sigma: float, rng: np.random.Generator) -> LatentSpec:
    """Equal-prior Gaussian mixture whose means are fair {0,1} coin flips per coordinate."""
    if n_components < 1:
        raise ValueError("need at least one mixture component")
    means = rng.integers(0, 2, size=(n_components, dim)).astype(np.float64)
    priors = np.full(n_components, 1.0 / n_components)
    return LatentSpec(GAUSSIAN_MIXTURE, dim, priors=priors, means=means, sigma=sigma)


def sample(spec: LatentSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` latent vectors, shape (n, dim).

    For the mixture, ``sigma`` is the per-coordinate standard deviation.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if spec.kind == UNIFORM:
        return rng.random((n, spec.dim))
    modes = rng.choice(spec.n_components, size=n, p=spec.priors)
    return spec.means[modes] + spec.sigma * rng.standard_normal((n, spec.dim))


def interpolation_path(a, b, steps: int) -> np.ndarray:
    """``steps`` evenly spaced points from ``a`` to ``b``; endpoints are copied exactly."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("endpoints must be vectors of the same dimension")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    t = np.arange(steps, dtype=np.float64)[:, None] / (steps - 1)
    path = a + t * (b - a)
    path[0] = a
    path[-1] = b
    return path


def random_corner(dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=dim).astype(np.float64)
