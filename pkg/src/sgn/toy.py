"""Two-mode planar Gaussian mixture used for quick end-to-end checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import latent_source, mlp, trainer


# Small gain keeps hidden activations, and so the per-update output jitter,
# well below the size of the mixture features; k = 5 smooths the matching.
TOY_GAIN = 0.25
TOY_HIDDEN = 16


def toy_config(seed: int = 0, epochs: int = 300) -> trainer.TrainConfig:
    return trainer.TrainConfig(N=250, B=250, k=5, eta=0.2, epochs=epochs,
                               grad_norm="per-sample-unit", latent_refresh="step",
                               seeds=trainer.Seeds(seed, seed + 1, seed + 2))


@dataclass(frozen=True)
class ToyMixture:
    separation: float = 2.0   # distance between the two centers
    sd: float = 0.5
    n: int = 500
    seed: int = 0

    def sample(self) -> np.ndarray:
        rng = latent_source.make_rng(self.seed)
        modes = rng.integers(0, 2, self.n)
        half = self.separation / (2.0 * np.sqrt(2.0))
        centers = np.array([[-half, -half], [half, half]])
        return centers[modes] + self.sd * rng.standard_normal((self.n, 2))


def toy_network(data: np.ndarray, hidden: int = TOY_HIDDEN, gain: float = TOY_GAIN, seed: int = 0,
                output_scale: float = 0.05) -> mlp.NetworkParams:
    """2 -> hidden -> 2 net whose output starts as a small cloud at the data mean."""
    net = mlp.init([2, hidden, data.shape[1]], gain, latent_source.make_rng(seed),
                   output_scale=output_scale)
    mlp.set_output_offset(net, data.mean(axis=0))
    return net


def moment_errors(generated: np.ndarray, data: np.ndarray) -> tuple[float, float]:
    """Largest per-coordinate gap in means and in standard deviations."""
    return (float(np.max(np.abs(generated.mean(0) - data.mean(0)))),
            float(np.max(np.abs(generated.std(0) - data.std(0)))))


def smoothed(values, window: int = 10) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    window = max(1, min(window, len(v)))
    return np.convolve(v, np.ones(window) / window, mode="valid")


def run(cfg: trainer.TrainConfig, mixture: ToyMixture = ToyMixture(), gain: float = TOY_GAIN,
        hooks: trainer.Hooks | None = None) -> tuple[trainer.TrainResult, np.ndarray]:
    data = mixture.sample()
    net = toy_network(data, gain=gain, seed=cfg.seeds.init)
    return trainer.train(cfg, data, net, latent_source.uniform_spec(2), hooks=hooks), data
